// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Multi-slot channel estimation. Each slot applies a known reconfiguration
// state; the RF chains observe y_t = Phi_t h + n_t (uplink pilot, reciprocal
// channel) and the stacked system is solved by least squares or ridge.

#pragma once

#include "imisac/framework.hpp"
#include "imisac/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace imisac
{
    struct PilotProtocol
    {
        std::vector<ReconfigState> slots;
        cplx pilot{1.0, 0.0};
        double noise_power = 0.0;
        std::uint64_t seed = 1;

        int num_slots() const { return static_cast<int>(slots.size()); }
    };

    struct StackedSystem
    {
        CVector y;   // T*K
        CMatrix Phi; // T*K x N_L
    };

    struct EstimationReport
    {
        CVector h_hat;
        std::optional<double> nmse;
        double condition_number = 1.0;
        int slots = 0;
        int rows = 0;
    };

    // (Q_L T_L ... Q_1 T_1)^T: K x N_L.
    CMatrix observation_matrix(const ArchitectureSpec &spec, std::span<const FeedingMatrix> feeds,
                               const ReconfigState &state);

    StackedSystem run_protocol(const ArchitectureSpec &spec, std::span<const FeedingMatrix> feeds,
                               const PilotProtocol &protocol, const CVector &h);

    // ridge = 0: least squares (needs full column rank); ridge > 0:
    // (Phi^H Phi + ridge I)^{-1} Phi^H y.
    EstimationReport solve_ls(const CVector &y, const CMatrix &Phi, double ridge,
                              const std::optional<CVector> &truth = std::nullopt, int slots = 0);

    // Uniform random feasible configurations, one per slot.
    std::vector<ReconfigState> design_configs(const ArchitectureSpec &spec, int T, std::uint64_t seed);

    // Q factor of a thin QR: same column space, Q^H Q = I.
    CMatrix orthonormalize_columns(const CMatrix &Phi);

    double nmse(const CVector &estimate, const CVector &truth);

    // Noise variance giving the requested per-entry SNR for channel h.
    double noise_for_snr(const CVector &h, double snr_db);
}

// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Time-modulated radiating layer. Each element cycles through P piecewise-
// constant coefficients per period; harmonic k of the radiated field sees the
// DFT bin c[n,k] = (1/P) sum_p q_n[p] e^{-j 2 pi k p / P} in place of q_n.
// Harmonic orders are taken modulo P.

#pragma once

#include "imisac/channel.hpp"
#include "imisac/framework.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace imisac
{
    struct TimeModulationPattern
    {
        int layer = 0;            // modulated layer index
        CMatrix sequences;        // N x P, entry (n, p) = q_n[p]
        double period = 1e-6;     // seconds
        ConstraintFamily family;

        int slots() const { return static_cast<int>(sequences.cols()); }
        int elements() const { return static_cast<int>(sequences.rows()); }
        double max_violation() const;
    };

    struct HarmonicDecomposition
    {
        CMatrix coefficients; // N x P, entry (n, k) = c[n,k]

        CVector harmonic(int k) const;
    };

    // Constant pattern repeating q on every slot.
    TimeModulationPattern constant_pattern(int layer, const CVector &q, int slots, const ConstraintFamily &family);

    HarmonicDecomposition harmonic_coefficients(const TimeModulationPattern &pattern);

    // Beam power at harmonic k with the final layer's Q replaced by diag(c[., k]).
    double harmonic_beam_pattern(const ArchitectureSpec &spec, std::span<const FeedingMatrix> feeds,
                                 const BasebandProcessor &V, const ReconfigState &state,
                                 const TimeModulationPattern &pattern, const HarmonicDecomposition &decomp, int k,
                                 const CVector &a);

    struct SplitWeights
    {
        double comm = 1.0;
        double sense = 1.0;
    };

    struct SplitDesign
    {
        TimeModulationPattern pattern;
        CVector c0;
        CVector c1;
        double objective = 0.0;
        double sense_gain = 0.0;          // |sum conj(a_n) c[n,1]|^2
        double max_comm_phase_error = 0.0; // radians, c0 vs comm_phases up to a common phase
    };

    // Split design on the radiating layer: the DC harmonic carries the
    // communication phase profile, harmonic 1 steers toward sense_direction.
    // Maximizes w_c ln G_c + w_s ln G_s with
    //     G_c = |sum conj(u_n) c[n,0]|^2 / N^2,  u_n = e^{j phi_n},
    //     G_s = |sum conj(a_n) c[n,1]|^2 / N^2.
    // A zero weight drops its term; sense weight 0 returns the constant pattern.
    // comm_magnitude adds a soft target on |c[n,0]| and throws InfeasibleSplit
    // when it exceeds the family's largest magnitude.
    SplitDesign design_split_pattern(const ArchitectureSpec &spec, std::span<const double> comm_phases,
                                     Direction sense_direction, int P, std::uint64_t seed,
                                     SplitWeights weights = {},
                                     std::optional<double> comm_magnitude = std::nullopt);
}

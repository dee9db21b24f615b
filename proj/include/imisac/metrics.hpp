// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#pragma once

#include "imisac/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace imisac
{
    struct RateReport
    {
        double sum_rate = 0.0;         // bits/s/Hz
        std::vector<double> sinr;      // linear, indexed by user
    };

    // stream_to_user[s] is the user served by column s of E. Exactly one stream
    // per user: the map must be a permutation of 0..U-1.
    RateReport sum_rate(const CMatrix &H, const CMatrix &E, double noise_power,
                        std::span<const int> stream_to_user);

    // Identity stream map 0..U-1.
    std::vector<int> identity_stream_map(int users);

    // a^H E E^H a.
    double beam_pattern(const CMatrix &E, const CVector &a);

    // Worst (smallest) beam power over a set of targets.
    double worst_target_power(const CMatrix &E, std::span<const CVector> targets);

    // ||E||_F^2 ||a||^2 / N: the power an isotropic (spatially white) transmitter
    // with the same total power would put toward a.
    double isotropic_power(const CMatrix &E, const CVector &a);

    struct MseReport
    {
        double mse = 0.0;
        double scale = 0.0; // alpha >= 0 minimizing mean (P - alpha * mask)^2
    };

    // Mean over the grid of (P(theta) - alpha mask(theta))^2 with the closed-form
    // nonnegative least-squares scale alpha.
    MseReport beampattern_mse(const CMatrix &E, std::span<const CVector> grid_steering,
                              std::span<const double> mask);

    // Same, on precomputed pattern samples.
    MseReport beampattern_mse(std::span<const double> pattern, std::span<const double> mask);

    // omega * rate / rate_ref + (1 - omega) * min_t power_t / power_ref.
    double isac_objective(double omega, double rate, double rate_ref, std::span<const double> target_power,
                          double power_ref);

    struct PatternSample
    {
        double angle_deg = 0.0;
        double power = 0.0;
    };

    struct ScenarioResult
    {
        double sum_rate = 0.0;
        std::vector<double> per_user_sinr;
        std::vector<PatternSample> beampattern;
        std::vector<double> target_power;
        std::vector<double> objective_trace;
        std::uint64_t seed = 0;
        std::string config_hash;

        // sum log2(1 + sinr) reproduces sum_rate.
        double recomputed_sum_rate() const;
    };
}

// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imisac
{
    std::vector<int> identity_stream_map(int users)
    {
        std::vector<int> m(static_cast<std::size_t>(users));
        for (int u = 0; u < users; ++u)
            m[static_cast<std::size_t>(u)] = u;
        return m;
    }

    RateReport sum_rate(const CMatrix &H, const CMatrix &E, double noise_power,
                        std::span<const int> stream_to_user)
    {
        const auto U = H.rows();
        const auto S = E.cols();
        if (H.cols() != E.rows())
            fail(ErrorCode::DimensionMismatch, "channel columns differ from aperture size");
        if (!(noise_power > 0.0))
            fail(ErrorCode::InvalidArgument, "noise power must be positive");
        if (static_cast<Eigen::Index>(stream_to_user.size()) != S || S != U)
            fail(ErrorCode::StreamMapInvalid, "need exactly one stream per user");

        std::vector<Eigen::Index> stream_of(static_cast<std::size_t>(U), -1);
        for (Eigen::Index s = 0; s < S; ++s)
        {
            const int u = stream_to_user[static_cast<std::size_t>(s)];
            if (u < 0 || u >= U || stream_of[static_cast<std::size_t>(u)] != -1)
                fail(ErrorCode::StreamMapInvalid, "stream map is not a permutation of the users");
            stream_of[static_cast<std::size_t>(u)] = s;
        }

        const CMatrix A = H * E;
        RateReport out;
        out.sinr.resize(static_cast<std::size_t>(U));
        for (Eigen::Index u = 0; u < U; ++u)
        {
            const Eigen::Index s = stream_of[static_cast<std::size_t>(u)];
            const double signal = std::norm(A(u, s));
            double interference = 0.0;
            for (Eigen::Index v = 0; v < S; ++v)
                if (v != s)
                    interference += std::norm(A(u, v));
            const double sinr = signal / (interference + noise_power);
            out.sinr[static_cast<std::size_t>(u)] = sinr;
            out.sum_rate += std::log2(1.0 + sinr);
        }
        return out;
    }

    double beam_pattern(const CMatrix &E, const CVector &a)
    {
        if (a.size() != E.rows())
            fail(ErrorCode::DimensionMismatch, "steering vector length " + std::to_string(a.size()) +
                                                   " differs from aperture size " + std::to_string(E.rows()));
        return (E.adjoint() * a).squaredNorm();
    }

    double worst_target_power(const CMatrix &E, std::span<const CVector> targets)
    {
        if (targets.empty())
            fail(ErrorCode::InvalidArgument, "no sensing targets");
        double worst = std::numeric_limits<double>::infinity();
        for (const auto &a : targets)
            worst = std::min(worst, beam_pattern(E, a));
        return worst;
    }

    double isotropic_power(const CMatrix &E, const CVector &a)
    {
        if (a.size() != E.rows())
            fail(ErrorCode::DimensionMismatch, "steering vector length differs from aperture size");
        return E.squaredNorm() * a.squaredNorm() / static_cast<double>(a.size());
    }

    MseReport beampattern_mse(std::span<const double> pattern, std::span<const double> mask)
    {
        if (pattern.empty())
            fail(ErrorCode::EmptyGrid, "beam-pattern grid is empty");
        if (pattern.size() != mask.size())
            fail(ErrorCode::DimensionMismatch, "mask length differs from grid length");
        double pm = 0.0;
        double mm = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i)
        {
            if (mask[i] < 0.0)
                fail(ErrorCode::InvalidArgument, "mask must be nonnegative");
            pm += pattern[i] * mask[i];
            mm += mask[i] * mask[i];
        }
        MseReport out;
        out.scale = mm > 0.0 ? std::max(pm / mm, 0.0) : 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i)
        {
            const double r = pattern[i] - out.scale * mask[i];
            out.mse += r * r;
        }
        out.mse /= static_cast<double>(mask.size());
        return out;
    }

    MseReport beampattern_mse(const CMatrix &E, std::span<const CVector> grid_steering,
                              std::span<const double> mask)
    {
        if (grid_steering.empty())
            fail(ErrorCode::EmptyGrid, "beam-pattern grid is empty");
        std::vector<double> pattern;
        pattern.reserve(grid_steering.size());
        for (const auto &a : grid_steering)
            pattern.push_back(beam_pattern(E, a));
        return beampattern_mse(pattern, mask);
    }

    double isac_objective(double omega, double rate, double rate_ref, std::span<const double> target_power,
                          double power_ref)
    {
        if (!(rate_ref > 0.0) || !(power_ref > 0.0))
            fail(ErrorCode::NonPositiveReference, "normalization references must be positive");
        if (!(omega >= 0.0 && omega <= 1.0))
            fail(ErrorCode::InvalidArgument, "weight must lie in [0, 1]");
        double sensing = 0.0;
        if (omega < 1.0)
        {
            if (target_power.empty())
                fail(ErrorCode::InvalidArgument, "no sensing targets");
            sensing = *std::min_element(target_power.begin(), target_power.end()) / power_ref;
        }
        return omega * (rate / rate_ref) + (1.0 - omega) * sensing;
    }

    double ScenarioResult::recomputed_sum_rate() const
    {
        double r = 0.0;
        for (double s : per_user_sinr)
            r += std::log2(1.0 + s);
        return r;
    }
}

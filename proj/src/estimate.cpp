// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/estimate.hpp"

#include "imisac/optimize.hpp"

#include <cmath>
#include <limits>

namespace imisac
{
    CMatrix observation_matrix(const ArchitectureSpec &spec, std::span<const FeedingMatrix> feeds,
                               const ReconfigState &state)
    {
        if (static_cast<int>(feeds.size()) != spec.num_layers() || state.num_layers() != spec.num_layers())
            fail(ErrorCode::DimensionMismatch, "feed, state and layer counts differ");
        if (!feeds.empty() && feeds.front().T.cols() != spec.num_rf_chains)
            fail(ErrorCode::DimensionMismatch, "layer 0 feed does not match the RF chain count");
        return layer_product(feeds, state).transpose();
    }

    StackedSystem run_protocol(const ArchitectureSpec &spec, std::span<const FeedingMatrix> feeds,
                               const PilotProtocol &protocol, const CVector &h)
    {
        if (protocol.slots.empty())
            fail(ErrorCode::InvalidArgument, "protocol needs at least one slot");
        const Eigen::Index K = spec.num_rf_chains;
        const Eigen::Index N = h.size();
        const Eigen::Index T = protocol.num_slots();
        StackedSystem out{CVector(T * K), CMatrix(T * K, N)};
        Rng rng(seed_for(protocol.seed, Stream::Estimation));
        for (Eigen::Index t = 0; t < T; ++t)
        {
            const CMatrix Phi = observation_matrix(spec, feeds, protocol.slots[static_cast<std::size_t>(t)]);
            if (Phi.cols() != N)
                fail(ErrorCode::DimensionMismatch, "channel length differs from aperture size");
            out.Phi.middleRows(t * K, K) = protocol.pilot * Phi;
            out.y.segment(t * K, K) = out.Phi.middleRows(t * K, K) * h;
            for (Eigen::Index k = 0; k < K; ++k)
                out.y(t * K + k) += protocol.noise_power > 0.0 ? rng.complex_normal(protocol.noise_power) : cplx{};
        }
        return out;
    }

    double nmse(const CVector &estimate, const CVector &truth)
    {
        return (estimate - truth).squaredNorm() / truth.squaredNorm();
    }

    EstimationReport solve_ls(const CVector &y, const CMatrix &Phi, double ridge,
                              const std::optional<CVector> &truth, int slots)
    {
        if (!(ridge >= 0.0))
            fail(ErrorCode::InvalidArgument, "ridge must be nonnegative");
        if (y.size() != Phi.rows())
            fail(ErrorCode::DimensionMismatch, "observation length differs from stacked rows");
        const auto rows = Phi.rows();
        const auto N = Phi.cols();

        EstimationReport r;
        r.rows = static_cast<int>(rows);
        r.slots = slots;
        if (ridge == 0.0 && rows < N)
            fail(ErrorCode::InsufficientObservations,
                 std::to_string(rows) + " observations for " + std::to_string(N) + " unknowns");

        if (rows >= N)
        {
            // Singular values of the triangular factor equal those of Phi.
            const Eigen::HouseholderQR<CMatrix> qr(Phi);
            const CMatrix R = qr.matrixQR().topRows(N).triangularView<Eigen::Upper>();
            const auto sv = Eigen::JacobiSVD<CMatrix>(R).singularValues();
            const double smin = sv(N - 1);
            r.condition_number = smin > 0.0 ? std::max(1.0, sv(0) / smin) : std::numeric_limits<double>::infinity();
            if (ridge == 0.0)
            {
                if (!(r.condition_number <= 1e12))
                    fail(ErrorCode::RankDeficient, "stacked system condition number exceeds 1e12");
                r.h_hat = qr.solve(y);
            }
        }
        else
            r.condition_number = std::numeric_limits<double>::infinity();

        if (ridge > 0.0)
        {
            const CMatrix A = Phi.adjoint() * Phi + ridge * CMatrix::Identity(N, N);
            r.h_hat = A.ldlt().solve(Phi.adjoint() * y);
        }
        if (truth)
        {
            if (truth->size() != N)
                fail(ErrorCode::DimensionMismatch, "true channel length differs from unknown count");
            r.nmse = nmse(r.h_hat, *truth);
        }
        return r;
    }

    std::vector<ReconfigState> design_configs(const ArchitectureSpec &spec, int T, std::uint64_t seed)
    {
        if (T < 1)
            fail(ErrorCode::InvalidArgument, "need at least one slot");
        Rng rng(seed_for(seed, Stream::Estimation, 1));
        std::vector<ReconfigState> out;
        out.reserve(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t)
        {
            ReconfigState s = random_state(spec, rng);
            for (auto &layer : s.layers)
                if (layer.family.is_amplitude())
                {
                    const double lo = layer.family.kind == ConstraintFamily::Kind::AmplitudeRange
                                          ? layer.family.lo
                                          : layer.family.levels.front();
                    const double hi = layer.family.max_magnitude();
                    for (auto &q : layer.q)
                        q = layer.family.project(cplx{rng.uniform(lo, hi), 0.0});
                }
            out.push_back(std::move(s));
        }
        return out;
    }

    CMatrix orthonormalize_columns(const CMatrix &Phi)
    {
        Eigen::HouseholderQR<CMatrix> qr(Phi);
        return qr.householderQ() * CMatrix::Identity(Phi.rows(), Phi.cols());
    }

    double noise_for_snr(const CVector &h, double snr_db)
    {
        return h.squaredNorm() / static_cast<double>(h.size()) * std::pow(10.0, -snr_db / 10.0);
    }
}

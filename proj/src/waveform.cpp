// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/waveform.hpp"

#include "imisac/metrics.hpp"
#include "imisac/optimize.hpp"
#include "imisac/random.hpp"

#include <algorithm>
#include <cmath>

namespace imisac
{
    double TimeModulationPattern::max_violation() const
    {
        double worst = 0.0;
        for (Eigen::Index n = 0; n < sequences.rows(); ++n)
            for (Eigen::Index p = 0; p < sequences.cols(); ++p)
                worst = std::max(worst, family.violation(sequences(n, p)));
        return worst;
    }

    CVector HarmonicDecomposition::harmonic(int k) const
    {
        const auto P = coefficients.cols();
        if (P == 0)
            fail(ErrorCode::InvalidArgument, "empty decomposition");
        const auto idx = ((k % P) + P) % P;
        return coefficients.col(idx);
    }

    TimeModulationPattern constant_pattern(int layer, const CVector &q, int slots, const ConstraintFamily &family)
    {
        if (slots < 1)
            fail(ErrorCode::InvalidArgument, "pattern needs at least one slot");
        TimeModulationPattern out;
        out.layer = layer;
        out.family = family;
        out.sequences = q.replicate(1, slots);
        return out;
    }

    HarmonicDecomposition harmonic_coefficients(const TimeModulationPattern &pattern)
    {
        const auto N = pattern.sequences.rows();
        const auto P = pattern.sequences.cols();
        if (P < 1)
            fail(ErrorCode::InvalidArgument, "pattern needs at least one slot");
        CMatrix dft(P, P);
        for (Eigen::Index p = 0; p < P; ++p)
            for (Eigen::Index k = 0; k < P; ++k)
            {
                // Exact unit roots for the angles on the axes.
                const auto r = (k * p) % P;
                if (4 * r % P == 0)
                {
                    static const cplx quarter[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
                    dft(p, k) = quarter[4 * r / P];
                }
                else
                    dft(p, k) = std::polar(1.0, -kTwoPi * static_cast<double>(r) / static_cast<double>(P));
            }
        HarmonicDecomposition out;
        out.coefficients = pattern.sequences * dft / static_cast<double>(P);
        (void)N;
        return out;
    }

    double harmonic_beam_pattern(const ArchitectureSpec &spec, std::span<const FeedingMatrix> feeds,
                                 const BasebandProcessor &V, const ReconfigState &state,
                                 const TimeModulationPattern &pattern, const HarmonicDecomposition &decomp, int k,
                                 const CVector &a)
    {
        const int L = spec.num_layers();
        if (pattern.layer != L - 1)
            fail(ErrorCode::UnsupportedMultiLayerModulation,
                 "only the radiating layer " + std::to_string(L - 1) + " may be time-modulated, got layer " +
                     std::to_string(pattern.layer));
        const auto P = decomp.coefficients.cols();
        if (k < 0 || k >= P)
            fail(ErrorCode::InvalidArgument, "harmonic order must lie in 0..P-1");
        if (static_cast<int>(feeds.size()) != L || state.num_layers() != L)
            fail(ErrorCode::DimensionMismatch, "feed, state and layer counts differ");
        if (decomp.coefficients.rows() != spec.aperture_elements())
            fail(ErrorCode::DimensionMismatch, "pattern length differs from aperture size");

        CMatrix X = V.V;
        for (int l = 0; l < L; ++l)
        {
            const auto &f = feeds[static_cast<std::size_t>(l)];
            if (f.T.cols() != X.rows())
                fail(ErrorCode::DimensionMismatch, "feed of layer " + std::to_string(l) + " does not chain");
            const CVector &q = l == L - 1 ? CVector(decomp.coefficients.col(k))
                                          : state.layers[static_cast<std::size_t>(l)].q;
            X = q.asDiagonal() * (f.T * X);
        }
        return beam_pattern(X, a);
    }

    namespace
    {
        constexpr double kMagnitudePenalty = 100.0;

        struct SplitProblem
        {
            ConstraintFamily family;
            Eigen::Index N = 0;
            Eigen::Index P = 0;
            CVector comm_unit; // e^{j phi_n}
            CVector a;
            SplitWeights w;
            std::optional<double> magnitude;

            CMatrix sequences(const RVector &theta) const
            {
                CMatrix q(N, P);
                for (Eigen::Index n = 0; n < N; ++n)
                    for (Eigen::Index p = 0; p < P; ++p)
                        q(n, p) = parameter_coefficient(family, theta(n * P + p));
                return q;
            }

            double evaluate(const RVector &theta, RVector *grad) const
            {
                const CMatrix q = sequences(theta);
                const CVector c0 = q.rowwise().sum() / static_cast<double>(P);
                CVector c1(N);
                for (Eigen::Index n = 0; n < N; ++n)
                {
                    cplx acc{};
                    for (Eigen::Index p = 0; p < P; ++p)
                        acc += q(n, p) * std::polar(1.0, -kTwoPi * static_cast<double>(p) / static_cast<double>(P));
                    c1(n) = acc / static_cast<double>(P);
                }
                const double n2 = static_cast<double>(N * N);

                // Proportional-fair split: w_c ln G_c + w_s ln G_s. A plain weighted
                // sum is maximized at a single harmonic.
                double f = 0.0;
                CVector g0 = CVector::Zero(N);
                CVector g1 = CVector::Zero(N);
                if (w.comm > 0.0)
                {
                    const cplx z = comm_unit.dot(c0); // sum conj(u_n) c0_n
                    const double G = std::norm(z) / n2;
                    f += w.comm * std::log(G);
                    g0 += (w.comm / (n2 * G)) * z * comm_unit;
                    if (magnitude)
                    {
                        // Soft target on |c0|.
                        for (Eigen::Index n = 0; n < N; ++n)
                        {
                            const double m = std::abs(c0(n));
                            const double r = m - *magnitude;
                            f -= kMagnitudePenalty * r * r / static_cast<double>(N);
                            if (m > 0.0)
                                g0(n) -= (kMagnitudePenalty / static_cast<double>(N)) * r * c0(n) / m;
                        }
                    }
                }
                if (w.sense > 0.0)
                {
                    const cplx z = a.dot(c1);
                    const double G = std::norm(z) / n2;
                    f += w.sense * std::log(G);
                    g1 += (w.sense / (n2 * G)) * z * a;
                }
                if (grad)
                {
                    grad->resize(N * P);
                    for (Eigen::Index n = 0; n < N; ++n)
                        for (Eigen::Index p = 0; p < P; ++p)
                        {
                            const cplx gq =
                                (g0(n) + g1(n) * std::polar(1.0, kTwoPi * static_cast<double>(p) / static_cast<double>(P))) /
                                static_cast<double>(P);
                            (*grad)(n * P + p) = 2.0 * (std::conj(gq) * parameter_derivative(family, q(n, p))).real();
                        }
                }
                return f;
            }
        };

        double phase_error(const CVector &c0, const CVector &unit)
        {
            // Best common rotation, then worst per-element deviation.
            const cplx z = unit.dot(c0);
            const double common = std::arg(z);
            double worst = 0.0;
            for (Eigen::Index n = 0; n < c0.size(); ++n)
            {
                if (std::abs(c0(n)) == 0.0)
                    return kPi;
                double d = std::arg(c0(n) * std::conj(unit(n)) * std::polar(1.0, -common));
                worst = std::max(worst, std::abs(d));
            }
            return worst;
        }
    }

    SplitDesign design_split_pattern(const ArchitectureSpec &spec, std::span<const double> comm_phases,
                                     Direction sense_direction, int P, std::uint64_t seed, SplitWeights weights,
                                     std::optional<double> comm_magnitude)
    {
        if (P < 2)
            fail(ErrorCode::InvalidArgument, "split design needs at least two slots");
        if (spec.layers.empty())
            fail(ErrorCode::InvalidArgument, "architecture has no layers");
        if (weights.comm < 0.0 || weights.sense < 0.0 || weights.comm + weights.sense <= 0.0)
            fail(ErrorCode::InvalidArgument, "split weights must be nonnegative and not both zero");
        const auto &layer = spec.layers.back();
        const auto N = static_cast<Eigen::Index>(layer.elements);
        if (static_cast<Eigen::Index>(comm_phases.size()) != N)
            fail(ErrorCode::DimensionMismatch, "one communication phase per aperture element required");
        const ConstraintFamily &family = layer.constraint;
        if (comm_magnitude && (*comm_magnitude < 0.0 || *comm_magnitude > family.max_magnitude() + 1e-15))
            fail(ErrorCode::InfeasibleSplit, "requested DC magnitude " + std::to_string(*comm_magnitude) +
                                                 " exceeds the largest feasible magnitude " +
                                                 std::to_string(family.max_magnitude()));

        SplitProblem prob;
        prob.family = family;
        prob.N = N;
        prob.P = P;
        prob.w = weights;
        prob.magnitude = comm_magnitude;
        prob.comm_unit.resize(N);
        for (Eigen::Index n = 0; n < N; ++n)
            prob.comm_unit(n) = std::polar(1.0, comm_phases[static_cast<std::size_t>(n)]);
        prob.a = farfield_steering(layer.positions, sense_direction, spec.wavelength());

        SplitDesign out;
        out.pattern.layer = spec.num_layers() - 1;
        out.pattern.family = family;

        auto finish = [&](CMatrix seq)
        {
            out.pattern.sequences = std::move(seq);
            const HarmonicDecomposition d = harmonic_coefficients(out.pattern);
            out.c0 = d.coefficients.col(0);
            out.c1 = d.coefficients.col(1);
            out.sense_gain = std::norm(prob.a.dot(out.c1));
            out.max_comm_phase_error = phase_error(out.c0, prob.comm_unit);
            return out;
        };

        // Parameter for a target coefficient.
        auto theta_of = [&](cplx target)
        {
            switch (family.kind)
            {
            case ConstraintFamily::Kind::UnitModulus: return std::arg(target);
            case ConstraintFamily::Kind::Lorentzian: return lorentzian_parameter(project_lorentzian(target));
            default: return family.project(target).real();
            }
        };

        if (weights.sense == 0.0)
        {
            CVector q(N);
            for (Eigen::Index n = 0; n < N; ++n)
                q(n) = family.project(comm_magnitude ? *comm_magnitude * prob.comm_unit(n) : prob.comm_unit(n));
            if (family.kind == ConstraintFamily::Kind::UnitModulus)
                q = prob.comm_unit;
            const RVector theta = [&]
            {
                RVector t(N * P);
                for (Eigen::Index n = 0; n < N; ++n)
                    for (Eigen::Index p = 0; p < P; ++p)
                        t(n * P + p) = family.kind == ConstraintFamily::Kind::UnitModulus
                                           ? comm_phases[static_cast<std::size_t>(n)]
                                           : theta_of(q(n));
                return t;
            }();
            CMatrix seq = family.kind == ConstraintFamily::Kind::UnitModulus ? CMatrix(q.replicate(1, P))
                                                                             : prob.sequences(theta);
            out.objective = prob.evaluate(theta, nullptr);
            return finish(std::move(seq));
        }

        std::vector<RVector> starts;
        {
            RVector t(N * P);
            // Sinusoidal phase modulation around the communication profile:
            // DC keeps the comm phases, harmonic 1 follows the steering phases.
            for (Eigen::Index n = 0; n < N; ++n)
                for (Eigen::Index p = 0; p < P; ++p)
                {
                    const double mod = std::cos(kTwoPi * static_cast<double>(p) / static_cast<double>(P) +
                                                std::arg(prob.a(n)) - std::arg(prob.comm_unit(n)) - kPi / 2);
                    t(n * P + p) = theta_of(prob.comm_unit(n) * std::polar(1.0, mod));
                }
            starts.push_back(t);
            if (weights.comm == 0.0)
            {
                for (Eigen::Index n = 0; n < N; ++n)
                    for (Eigen::Index p = 0; p < P; ++p)
                        t(n * P + p) = theta_of(std::polar(
                            1.0, kTwoPi * static_cast<double>(p) / static_cast<double>(P) + std::arg(prob.a(n))));
                starts.push_back(t);
            }
            Rng rng(seed_for(seed, Stream::Waveform));
            for (Eigen::Index i = 0; i < t.size(); ++i)
                t(i) = family.is_amplitude() ? rng.uniform(0.0, family.max_magnitude()) : rng.phase();
            starts.push_back(t);
        }

        SmoothProblem smooth;
        smooth.evaluate = [&](const RVector &theta, RVector *grad) { return prob.evaluate(theta, grad); };
        smooth.project = [&](const RVector &theta)
        {
            if (!family.is_amplitude())
                return theta;
            RVector o = theta;
            for (Eigen::Index i = 0; i < o.size(); ++i)
                o(i) = project_amplitude(cplx{o(i), 0.0}, family);
            return o;
        };
        OptimizerConfig cfg;
        cfg.max_iters = 500;
        cfg.tolerance = 1e-12;

        std::optional<AscentResult> best;
        for (const auto &s : starts)
        {
            if (!std::isfinite(prob.evaluate(smooth.project(s), nullptr)))
                continue;
            AscentResult r = projected_ascent(smooth, s, cfg);
            if (!best || r.objective.back() > best->objective.back())
                best = std::move(r);
        }
        if (!best)
            fail(ErrorCode::InfeasibleSplit, "no start point reaches both harmonics");
        out.objective = best->objective.back();
        return finish(prob.sequences(best->theta));
    }
}

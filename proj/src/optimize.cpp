// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace imisac
{
    namespace
    {
        using CK = ConstraintFamily::Kind;

        double wrap_phase(double phi)
        {
            double w = std::fmod(phi, kTwoPi);
            if (w < 0.0)
                w += kTwoPi;
            if (w >= kTwoPi)
                w = 0.0;
            return w;
        }
    }

    cplx parameter_coefficient(const ConstraintFamily &family, double theta)
    {
        switch (family.kind)
        {
        case CK::UnitModulus: return std::polar(1.0, theta);
        case CK::Lorentzian: return lorentzian_point(theta);
        default: return {project_amplitude(cplx{theta, 0.0}, family), 0.0};
        }
    }

    cplx parameter_derivative(const ConstraintFamily &family, cplx q)
    {
        switch (family.kind)
        {
        case CK::UnitModulus: return kJ * q;
        case CK::Lorentzian: return kJ * (q - 0.5 * kJ);
        default: return {1.0, 0.0};
        }
    }

    namespace
    {
        cplx coefficient(const ConstraintFamily &family, double theta) { return parameter_coefficient(family, theta); }

        cplx coefficient_derivative(const ConstraintFamily &family, cplx q) { return parameter_derivative(family, q); }

        double parameter_of(const ConstraintFamily &family, cplx q)
        {
            switch (family.kind)
            {
            case CK::UnitModulus: return wrap_phase(std::arg(q));
            case CK::Lorentzian: return wrap_phase(lorentzian_parameter(q));
            default: return q.real();
            }
        }

        double weighted_rate_value(const Scenario &sc, const CMatrix &E, CMatrix *grad_E)
        {
            const CMatrix &H = sc.channels.H;
            const double sigma2 = sc.channels.noise_power;
            const auto map = sc.stream_map();
            const auto U = H.rows();
            const auto S = E.cols();
            if (H.cols() != E.rows())
                fail(ErrorCode::DimensionMismatch, "channel columns differ from aperture size");
            if (S != U || static_cast<Eigen::Index>(map.size()) != S)
                fail(ErrorCode::StreamMapInvalid, "need exactly one stream per user");
            std::vector<Eigen::Index> stream_of(static_cast<std::size_t>(U), -1);
            for (Eigen::Index s = 0; s < S; ++s)
            {
                const int u = map[static_cast<std::size_t>(s)];
                if (u < 0 || u >= U || stream_of[static_cast<std::size_t>(u)] != -1)
                    fail(ErrorCode::StreamMapInvalid, "stream map is not a permutation of the users");
                stream_of[static_cast<std::size_t>(u)] = s;
            }

            const CMatrix A = H * E;
            CMatrix GA;
            if (grad_E)
                GA = CMatrix::Zero(U, S);
            const double inv_ln2 = 1.0 / std::numbers::ln2;
            double rate = 0.0;
            for (Eigen::Index u = 0; u < U; ++u)
            {
                const Eigen::Index su = stream_of[static_cast<std::size_t>(u)];
                double interference = 0.0;
                for (Eigen::Index v = 0; v < S; ++v)
                    if (v != su)
                        interference += std::norm(A(u, v));
                const double total = interference + std::norm(A(u, su));
                rate += std::log2((total + sigma2) / (interference + sigma2));
                if (grad_E)
                {
                    for (Eigen::Index v = 0; v < S; ++v)
                    {
                        cplx g = A(u, v) / (total + sigma2);
                        if (v != su)
                            g -= A(u, v) / (interference + sigma2);
                        GA(u, v) = inv_ln2 * g;
                    }
                }
            }
            if (grad_E)
                *grad_E = H.adjoint() * GA;
            return rate;
        }

        // Worst-target beam power; the gradient follows the active target.
        double worst_power_value(const Scenario &sc, const CMatrix &E, CMatrix *grad_E)
        {
            const auto &targets = sc.channels.target_steering;
            if (targets.empty())
                fail(ErrorCode::InvalidArgument, "sensing objective needs at least one target");
            std::size_t worst = 0;
            double worst_p = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < targets.size(); ++t)
            {
                const double p = beam_pattern(E, targets[t]);
                if (p < worst_p)
                {
                    worst_p = p;
                    worst = t;
                }
            }
            if (grad_E)
            {
                const CVector &a = targets[worst];
                *grad_E = a * (a.adjoint() * E);
            }
            return worst_p;
        }

        // -mean (P - alpha mask)^2 with alpha fixed so the desired pattern carries
        // the isotropic level power_budget at every grid point on average.
        double mse_value(const Scenario &sc, const CMatrix &E, CMatrix *grad_E)
        {
            const auto &grid = sc.mse_grid;
            if (grid.empty())
                fail(ErrorCode::EmptyGrid, "beam-pattern grid is empty");
            if (sc.mse_mask.size() != grid.size())
                fail(ErrorCode::DimensionMismatch, "mask length differs from grid length");
            double mask_total = 0.0;
            for (double m : sc.mse_mask)
                mask_total += m;
            if (!(mask_total > 0.0))
                fail(ErrorCode::InvalidArgument, "mask must have positive total");
            const double n = static_cast<double>(grid.size());
            const double alpha = sc.spec.power_budget * n / mask_total;

            double mse = 0.0;
            if (grad_E)
                grad_E->setZero(E.rows(), E.cols());
            for (std::size_t i = 0; i < grid.size(); ++i)
            {
                const Eigen::RowVectorXcd proj = grid[i].adjoint() * E;
                const double r = proj.squaredNorm() - alpha * sc.mse_mask[i];
                mse += r * r / n;
                if (grad_E)
                    *grad_E -= (2.0 * r / n) * grid[i] * proj;
            }
            return -mse;
        }

        Scenario with_baseband(const Scenario &sc, const BasebandProcessor &V)
        {
            Scenario out = sc;
            out.baseband = V;
            return out;
        }

        double rate_of(const Scenario &sc, const CMatrix &E)
        {
            return sum_rate(sc.channels.H, E, sc.channels.noise_power, sc.stream_map()).sum_rate;
        }

        CMatrix effective(const Scenario &sc, const ReconfigState &state)
        {
            return build_effective_matrix(sc.spec, sc.baseband, sc.feeds, state).E;
        }
    }

    std::string_view to_string(ObjectiveKind k)
    {
        switch (k)
        {
        case ObjectiveKind::SumRate: return "SumRate";
        case ObjectiveKind::BeamPatternGain: return "BeamPatternGain";
        case ObjectiveKind::WeightedISAC: return "WeightedISAC";
        case ObjectiveKind::BeampatternMSE: return "BeampatternMSE";
        }
        return "SumRate";
    }

    std::optional<ObjectiveKind> parse_objective_kind(std::string_view s)
    {
        for (auto k : {ObjectiveKind::SumRate, ObjectiveKind::BeamPatternGain, ObjectiveKind::WeightedISAC,
                       ObjectiveKind::BeampatternMSE})
            if (to_string(k) == s)
                return k;
        return std::nullopt;
    }

    std::string_view to_string(TraceStatus s)
    {
        switch (s)
        {
        case TraceStatus::Converged: return "Converged";
        case TraceStatus::MaxIterations: return "MaxIterations";
        case TraceStatus::Stalled: return "Stalled";
        }
        return "MaxIterations";
    }

    std::vector<int> Scenario::stream_map() const
    {
        if (!stream_to_user.empty())
            return stream_to_user;
        return identity_stream_map(channels.num_users());
    }

    double objective_on_matrix(const Scenario &sc, const OptimizerConfig &cfg, const CMatrix &E, CMatrix *grad)
    {
        switch (cfg.objective)
        {
        case ObjectiveKind::SumRate:
            return weighted_rate_value(sc, E, grad);
        case ObjectiveKind::BeamPatternGain:
            return worst_power_value(sc, E, grad);
        case ObjectiveKind::BeampatternMSE:
        {
            // Scored on the field rescaled to the power budget.
            const double n2 = E.squaredNorm();
            if (!(n2 > 0.0))
                fail(ErrorCode::NonFiniteObjective, "beam-pattern error is undefined for a zero field");
            const double s = std::sqrt(sc.spec.power_budget / n2);
            CMatrix G;
            const double value = mse_value(sc, s * E, grad ? &G : nullptr);
            if (grad)
            {
                const double proj = (G.conjugate().cwiseProduct(E)).sum().real() / n2;
                *grad = s * (G - proj * E);
            }
            return value;
        }
        case ObjectiveKind::WeightedISAC:
        {
            if (!(cfg.rate_ref > 0.0) || !(cfg.power_ref > 0.0))
                fail(ErrorCode::NonPositiveReference, "normalization references must be positive");
            const double w = cfg.omega;
            CMatrix g_rate, g_power;
            double value = 0.0;
            if (w > 0.0)
                value += w * weighted_rate_value(sc, E, grad ? &g_rate : nullptr) / cfg.rate_ref;
            if (w < 1.0)
                value += (1.0 - w) * worst_power_value(sc, E, grad ? &g_power : nullptr) / cfg.power_ref;
            if (grad)
            {
                grad->setZero(E.rows(), E.cols());
                if (w > 0.0)
                    *grad += (w / cfg.rate_ref) * g_rate;
                if (w < 1.0)
                    *grad += ((1.0 - w) / cfg.power_ref) * g_power;
            }
            return value;
        }
        }
        return 0.0;
    }

    // ---------------------------------------------------------------------
    // Parameter chart

    int parameter_count(const ReconfigState &state)
    {
        int n = 0;
        for (const auto &l : state.layers)
            n += static_cast<int>(l.q.size());
        return n;
    }

    RVector state_parameters(const ReconfigState &state)
    {
        RVector theta(parameter_count(state));
        Eigen::Index i = 0;
        for (const auto &l : state.layers)
            for (Eigen::Index n = 0; n < l.q.size(); ++n)
                theta(i++) = parameter_of(l.family, l.q(n));
        return theta;
    }

    ReconfigState state_from_parameters(const ReconfigState &shape, const RVector &theta)
    {
        if (theta.size() != parameter_count(shape))
            fail(ErrorCode::DimensionMismatch, "parameter vector length differs from state size");
        ReconfigState out = shape;
        Eigen::Index i = 0;
        for (auto &l : out.layers)
            for (Eigen::Index n = 0; n < l.q.size(); ++n)
                l.q(n) = coefficient(l.family, theta(i++));
        return out;
    }

    RVector project_parameters(const ReconfigState &shape, const RVector &theta)
    {
        RVector out = theta;
        Eigen::Index i = 0;
        for (const auto &l : shape.layers)
            for (Eigen::Index n = 0; n < l.q.size(); ++n, ++i)
                out(i) = l.family.is_amplitude() ? project_amplitude(cplx{theta(i), 0.0}, l.family)
                                                 : wrap_phase(theta(i));
        return out;
    }

    ReconfigState random_state(const ArchitectureSpec &spec, Rng &rng)
    {
        ReconfigState state = initial_state(spec);
        for (auto &l : state.layers)
            if (!l.family.is_amplitude())
                for (Eigen::Index n = 0; n < l.q.size(); ++n)
                    l.q(n) = coefficient(l.family, rng.phase());
        return state;
    }

    double evaluate_objective(const Scenario &sc, const OptimizerConfig &cfg, const ReconfigState &state,
                              RVector *grad, CMatrix *grad_V)
    {
        const auto L = sc.feeds.size();
        if (state.layers.size() != L)
            fail(ErrorCode::DimensionMismatch, "state and feed layer counts differ");

        std::vector<CMatrix> pre(L); // T_l X_{l-1}
        CMatrix X = sc.baseband.V;
        for (std::size_t l = 0; l < L; ++l)
        {
            pre[l] = sc.feeds[l].T * X;
            X = state.layers[l].q.asDiagonal() * pre[l];
        }

        double scale = 1.0;
        if (sc.spec.normalization == PowerNormalization::EndToEnd)
        {
            const double norm = X.norm();
            if (norm > 0.0)
                scale = std::sqrt(sc.spec.power_budget) / norm;
        }
        const CMatrix E = scale * X;

        CMatrix G;
        const double value = objective_on_matrix(sc, cfg, E, (grad || grad_V) ? &G : nullptr);
        if (!std::isfinite(value))
            fail(ErrorCode::NonFiniteObjective, "objective evaluated to a non-finite value");
        if (!grad && !grad_V)
            return value;

        if (sc.spec.normalization == PowerNormalization::EndToEnd)
        {
            const double n2 = X.squaredNorm();
            if (n2 > 0.0)
            {
                const double proj = (G.conjugate().cwiseProduct(X)).sum().real() / n2;
                G = scale * (G - proj * X);
            }
        }

        if (grad)
            grad->resize(parameter_count(state));
        Eigen::Index offset = parameter_count(state);
        for (std::size_t li = L; li-- > 0;)
        {
            const auto &ls = state.layers[li];
            const auto N = ls.q.size();
            offset -= N;
            if (grad)
                for (Eigen::Index n = 0; n < N; ++n)
                {
                    const cplx gq = (G.row(n).array() * pre[li].row(n).array().conjugate()).sum();
                    const cplx dq = coefficient_derivative(ls.family, ls.q(n));
                    (*grad)(offset + n) = 2.0 * (std::conj(gq) * dq).real();
                }
            if (li > 0 || grad_V)
                G = sc.feeds[li].T.adjoint() * (ls.q.conjugate().asDiagonal() * G);
        }
        if (grad_V)
            *grad_V = std::move(G);
        return value;
    }

    // ---------------------------------------------------------------------
    // Projected ascent

    AscentResult projected_ascent(const SmoothProblem &problem, RVector theta0, const OptimizerConfig &cfg)
    {
        if (cfg.max_iters < 1)
            fail(ErrorCode::InvalidArgument, "max_iters must be at least 1");
        if (!(cfg.tolerance > 0.0))
            fail(ErrorCode::InvalidArgument, "tolerance must be positive");

        AscentResult out;
        RVector theta = problem.project(theta0);
        RVector grad;
        double f = problem.evaluate(theta, &grad);
        if (!std::isfinite(f) || !grad.allFinite())
            fail(ErrorCode::NonFiniteObjective, "objective or gradient is not finite at the start point");
        out.objective.push_back(f);

        const bool backtracking = cfg.step.kind == StepRule::Kind::Backtracking;
        const double gmax0 = grad.cwiseAbs().maxCoeff();
        double eta = backtracking ? cfg.step.initial / std::max(gmax0, 1e-300) : cfg.step.initial;

        RVector next_grad;
        for (int it = 0; it < cfg.max_iters; ++it)
        {
            const double gmax = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
            if (gmax == 0.0)
            {
                out.status = TraceStatus::Converged;
                break;
            }

            RVector next;
            double f_next = f;
            if (!backtracking)
            {
                next = problem.project(theta + eta * grad);
                f_next = problem.evaluate(next, &next_grad);
                if (!std::isfinite(f_next))
                    fail(ErrorCode::NonFiniteObjective, "objective is not finite");
            }
            else
            {
                bool accepted = false;
                while (true)
                {
                    if (eta * gmax < 1e-12)
                        break;
                    next = problem.project(theta + eta * grad);
                    f_next = problem.evaluate(next, &next_grad);
                    if (!std::isfinite(f_next))
                        fail(ErrorCode::NonFiniteObjective, "objective is not finite");
                    const double ascent = grad.dot(next - theta);
                    if (f_next >= f && f_next >= f + cfg.step.c * ascent)
                    {
                        accepted = true;
                        break;
                    }
                    eta *= cfg.step.tau;
                }
                if (!accepted)
                {
                    out.status = TraceStatus::Stalled;
                    break;
                }
                eta /= cfg.step.tau;
            }

            const double change = std::abs(f_next - f);
            theta = std::move(next);
            grad = next_grad;
            f = f_next;
            out.objective.push_back(f);
            out.iterations = it + 1;
            if (change <= cfg.tolerance * std::max(1.0, std::abs(f)))
            {
                out.status = TraceStatus::Converged;
                break;
            }
        }
        out.theta = std::move(theta);
        return out;
    }

    OptimizationTrace gradient_ascent(const Scenario &sc, const ReconfigState &state0, const OptimizerConfig &cfg)
    {
        if (state0.max_violation() > kBuildConstraintTolerance)
            fail(ErrorCode::ConstraintViolation, "initial state is infeasible");
        check_dimensions(sc.spec, sc.baseband, sc.feeds, state0);

        SmoothProblem problem;
        problem.evaluate = [&](const RVector &theta, RVector *grad)
        {
            return evaluate_objective(sc, cfg, state_from_parameters(state0, theta), grad);
        };
        problem.project = [&](const RVector &theta)
        {
            RVector out = theta;
            Eigen::Index i = 0;
            for (const auto &l : state0.layers)
                for (Eigen::Index n = 0; n < l.q.size(); ++n, ++i)
                    if (l.family.is_amplitude())
                        out(i) = project_amplitude(cplx{theta(i), 0.0}, l.family);
            return out;
        };

        const AscentResult r = projected_ascent(problem, state_parameters(state0), cfg);
        OptimizationTrace trace;
        trace.objective = r.objective;
        trace.state = state_from_parameters(state0, project_parameters(state0, r.theta));
        trace.baseband = sc.baseband;
        trace.status = r.status;
        trace.iterations = r.iterations;
        return trace;
    }

    OptimizationTrace gradient_ascent(const ArchitectureSpec &spec, const BasebandProcessor &V,
                                      std::span<const FeedingMatrix> feeds, const ReconfigState &state0,
                                      const ChannelSet &channels, const OptimizerConfig &cfg)
    {
        Scenario sc;
        sc.spec = spec;
        sc.baseband = V;
        sc.feeds.assign(feeds.begin(), feeds.end());
        sc.channels = channels;
        return gradient_ascent(sc, state0, cfg);
    }

    OptimizationTrace multistart_ascent(const Scenario &sc, const OptimizerConfig &cfg,
                                        std::span<const ReconfigState> warm_starts)
    {
        Rng rng(seed_for(cfg.seed, Stream::Initial));
        std::optional<OptimizationTrace> best;
        const int random_starts = std::max(cfg.starts, 1);
        for (int s = 0; s < random_starts + static_cast<int>(warm_starts.size()); ++s)
        {
            const ReconfigState start = s < random_starts ? random_state(sc.spec, rng)
                                                          : warm_starts[static_cast<std::size_t>(s - random_starts)];
            OptimizationTrace t = gradient_ascent(sc, start, cfg);
            if (!best || t.final_objective() > best->final_objective())
                best = std::move(t);
        }
        return std::move(*best);
    }

    // ---------------------------------------------------------------------
    // Digital precoding

    std::vector<double> water_filling(std::span<const double> gains, double power_budget)
    {
        std::vector<double> p(gains.size(), 0.0);
        if (gains.empty() || !(power_budget > 0.0))
            return p;
        double inv_max = 0.0;
        bool any = false;
        for (double g : gains)
            if (g > 0.0)
            {
                inv_max = std::max(inv_max, 1.0 / g);
                any = true;
            }
        if (!any)
            return p;

        auto allocated = [&](double mu)
        {
            double total = 0.0;
            for (std::size_t i = 0; i < gains.size(); ++i)
                p[i] = gains[i] > 0.0 ? std::max(0.0, mu - 1.0 / gains[i]) : 0.0;
            for (double v : p)
                total += v;
            return total;
        };

        double lo = 0.0;
        double hi = power_budget + inv_max;
        for (int it = 0; it < 500; ++it)
        {
            const double mu = 0.5 * (lo + hi);
            const double total = allocated(mu);
            if (std::abs(total - power_budget) <= 1e-10)
                break;
            (total > power_budget ? hi : lo) = mu;
        }
        // Remove the bisection residual so the budget holds exactly.
        double total = 0.0;
        for (double v : p)
            total += v;
        if (total > 0.0)
            for (double &v : p)
                v *= power_budget / total;
        return p;
    }

    PrecoderReport zf_waterfilling(const CMatrix &H_eff, double noise_power, double power_budget)
    {
        const auto U = H_eff.rows();
        const auto K = H_eff.cols();
        PrecoderReport out;
        Eigen::JacobiSVD<CMatrix> svd(H_eff);
        const auto &sv = svd.singularValues();
        const double smax = sv.size() ? sv(0) : 0.0;
        const double smin = (U <= K && sv.size() == U) ? sv(U - 1) : 0.0;
        out.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        if (!(out.condition_number <= 1e12))
            fail(ErrorCode::SingularEffectiveChannel,
                 "effective channel is rank-deficient (condition number " + std::to_string(out.condition_number) + ")");

        const CMatrix gram = H_eff * H_eff.adjoint();
        const double ridge = 1e-9 * gram.trace().real() / static_cast<double>(U);
        const CMatrix W = H_eff.adjoint() * (gram + ridge * CMatrix::Identity(U, U)).ldlt().solve(CMatrix::Identity(U, U));

        CMatrix Wn(K, U);
        std::vector<double> gains(static_cast<std::size_t>(U));
        for (Eigen::Index u = 0; u < U; ++u)
        {
            Wn.col(u) = W.col(u) / W.col(u).norm();
            gains[static_cast<std::size_t>(u)] = std::norm((H_eff.row(u) * Wn.col(u))(0)) / noise_power;
        }

        out.powers = water_filling(gains, power_budget);
        out.baseband.total_power_budget = power_budget;
        out.baseband.V = Wn;
        for (Eigen::Index u = 0; u < U; ++u)
            out.baseband.V.col(u) *= std::sqrt(out.powers[static_cast<std::size_t>(u)]);
        return out;
    }

    BasebandProcessor zf_equal_power(const CMatrix &H_eff, double power_budget)
    {
        const auto U = H_eff.rows();
        Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(H_eff);
        CMatrix W = cod.pseudoInverse();
        for (Eigen::Index u = 0; u < U; ++u)
            W.col(u) *= std::sqrt(power_budget / static_cast<double>(U)) / W.col(u).norm();
        return {W, power_budget};
    }

    BasebandProcessor precoder_ascent(const Scenario &sc, const OptimizerConfig &cfg, const ReconfigState &state)
    {
        const auto K = sc.baseband.V.rows();
        const auto S = sc.baseband.V.cols();
        const double budget = sc.spec.power_budget;
        // Coordinates are V / sqrt(budget), so steps do not depend on the power scale.
        const double root = std::sqrt(budget);
        auto to_matrix = [&](const RVector &x)
        {
            CMatrix V(K, S);
            for (Eigen::Index i = 0; i < K * S; ++i)
                V(i % K, i / K) = root * cplx{x(2 * i), x(2 * i + 1)};
            return V;
        };

        SmoothProblem problem;
        problem.evaluate = [&](const RVector &x, RVector *grad)
        {
            Scenario trial = with_baseband(sc, {to_matrix(x), budget});
            CMatrix G;
            const double f = evaluate_objective(trial, cfg, state, nullptr, grad ? &G : nullptr);
            if (grad)
            {
                // d f / d Re v = 2 Re g, d f / d Im v = 2 Im g.
                grad->resize(2 * K * S);
                for (Eigen::Index i = 0; i < K * S; ++i)
                {
                    (*grad)(2 * i) = 2.0 * root * G(i % K, i / K).real();
                    (*grad)(2 * i + 1) = 2.0 * root * G(i % K, i / K).imag();
                }
            }
            return f;
        };
        problem.project = [](const RVector &x)
        {
            const double n2 = x.squaredNorm();
            return n2 > 1.0 ? RVector(x / std::sqrt(n2)) : x;
        };

        RVector x0(2 * K * S);
        for (Eigen::Index i = 0; i < K * S; ++i)
        {
            x0(2 * i) = sc.baseband.V(i % K, i / K).real() / root;
            x0(2 * i + 1) = sc.baseband.V(i % K, i / K).imag() / root;
        }
        const AscentResult r = projected_ascent(problem, x0, cfg);
        return {to_matrix(r.theta), budget};
    }

    bool has_digital_precoding(const ArchitectureSpec &spec)
    {
        switch (spec.kind)
        {
        case ArchKind::DMA:
        case ArchKind::RHS: return true;
        case ArchKind::Custom: return spec.num_rf_chains > 1;
        default: return false;
        }
    }

    OptimizationTrace alternating_optimize(const Scenario &sc, const OptimizerConfig &cfg,
                                           std::span<const ReconfigState> warm_starts)
    {
        if (!has_digital_precoding(sc.spec))
            fail(ErrorCode::InvalidArgument, std::string("alternating optimization needs a digitally precoded architecture, got ") +
                                                 std::string(to_string(sc.spec.kind)));
        if (sc.spec.num_streams != sc.channels.num_users())
            fail(ErrorCode::StreamMapInvalid, "need exactly one stream per user");

        const double budget = sc.spec.power_budget;
        auto precoder = [&](const ReconfigState &state)
        {
            const CMatrix H_eff = sc.channels.H * layer_product(sc.feeds, state);
            BasebandProcessor V = zf_waterfilling(H_eff, sc.channels.noise_power, budget).baseband;
            // Streams follow the stream map: column s serves user map[s].
            const auto map = sc.stream_map();
            BasebandProcessor ordered = V;
            for (std::size_t s = 0; s < map.size(); ++s)
                ordered.V.col(static_cast<Eigen::Index>(s)) = V.V.col(map[s]);
            return ordered;
        };

        Rng rng(seed_for(cfg.seed, Stream::Initial));
        OptimizerConfig inner = cfg;
        std::optional<OptimizationTrace> best;
        const int random_starts = std::max(cfg.starts, 1);
        for (int start = 0; start < random_starts + static_cast<int>(warm_starts.size()); ++start)
        {
            OptimizationTrace trace;
            trace.state = start < random_starts ? random_state(sc.spec, rng)
                                                : warm_starts[static_cast<std::size_t>(start - random_starts)];
            trace.baseband = precoder(trace.state);
            double f = evaluate_objective(with_baseband(sc, trace.baseband), cfg, trace.state);
            trace.objective.push_back(f);
            trace.status = TraceStatus::MaxIterations;

            for (int round = 1; round <= cfg.outer_rounds; ++round)
            {
                const double f_prev = f;
                // (b) reconfiguration with V fixed
                const Scenario fixed = with_baseband(sc, trace.baseband);
                OptimizationTrace layer = gradient_ascent(fixed, trace.state, inner);
                if (layer.final_objective() >= f)
                {
                    trace.state = std::move(layer.state);
                    f = layer.final_objective();
                }
                // (a) precoder with Q fixed: zero-forcing water-filling and a projected
                // gradient refinement of the current V; the better one is kept only
                // if it does not lose objective.
                const BasebandProcessor zf = precoder(trace.state);
                const double f_zf = evaluate_objective(with_baseband(sc, zf), cfg, trace.state);
                if (f_zf >= f)
                {
                    trace.baseband = zf;
                    f = f_zf;
                }
                const BasebandProcessor refined = precoder_ascent(with_baseband(sc, trace.baseband), inner, trace.state);
                const double f_ref = evaluate_objective(with_baseband(sc, refined), cfg, trace.state);
                if (f_ref >= f)
                {
                    trace.baseband = refined;
                    f = f_ref;
                }
                trace.objective.push_back(f);
                trace.iterations = round;
                if (std::abs(f - f_prev) <= cfg.tolerance * std::max(1.0, std::abs(f)))
                {
                    trace.status = TraceStatus::Converged;
                    break;
                }
            }
            if (!best || trace.final_objective() > best->final_objective())
                best = std::move(trace);
        }
        return std::move(*best);
    }

    OptimizationTrace optimize(const Scenario &sc, const OptimizerConfig &cfg,
                               std::span<const ReconfigState> warm_starts)
    {
        if (has_digital_precoding(sc.spec))
            return alternating_optimize(sc, cfg, warm_starts);
        return multistart_ascent(sc, cfg, warm_starts);
    }

    // ---------------------------------------------------------------------
    // Gradient checking

    GradientReport check_gradient(const std::function<double(const RVector &, RVector *)> &objective,
                                  const RVector &point, double h_fd)
    {
        if (!(h_fd >= 1e-8 && h_fd <= 1e-3))
            fail(ErrorCode::InvalidArgument, "finite-difference step must lie in [1e-8, 1e-3]");
        GradientReport r;
        objective(point, &r.analytic);
        r.finite_difference.resize(point.size());
        RVector x = point;
        for (Eigen::Index i = 0; i < point.size(); ++i)
        {
            x(i) = point(i) + h_fd;
            const double fp = objective(x, nullptr);
            x(i) = point(i) - h_fd;
            const double fm = objective(x, nullptr);
            x(i) = point(i);
            r.finite_difference(i) = (fp - fm) / (2.0 * h_fd);
        }
        const RVector diff = r.analytic - r.finite_difference;
        r.max_abs_error = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
        const double scale = std::max({r.analytic.size() ? r.analytic.cwiseAbs().maxCoeff() : 0.0,
                                       r.finite_difference.size() ? r.finite_difference.cwiseAbs().maxCoeff() : 0.0,
                                       1e-300});
        r.max_relative_error = r.max_abs_error / scale;
        return r;
    }

    // ---------------------------------------------------------------------
    // ISAC trade-off

    ParetoResult pareto_sweep(const Scenario &sc, std::span<const double> omega_grid, const OptimizerConfig &cfg)
    {
        if (omega_grid.empty())
            fail(ErrorCode::InvalidArgument, "weight grid is empty");
        for (std::size_t i = 0; i < omega_grid.size(); ++i)
        {
            if (!(omega_grid[i] >= 0.0 && omega_grid[i] <= 1.0))
                fail(ErrorCode::InvalidArgument, "weights must lie in [0, 1]");
            if (i > 0 && omega_grid[i] < omega_grid[i - 1])
                fail(ErrorCode::InvalidArgument, "weight grid must be sorted");
        }

        auto point_of = [&](double omega, const OptimizationTrace &t)
        {
            ParetoPoint p;
            p.omega = omega;
            const Scenario fixed = with_baseband(sc, t.baseband);
            const CMatrix E = effective(fixed, t.state);
            p.rate = rate_of(fixed, E);
            p.worst_target_power = worst_target_power(E, sc.channels.target_steering);
            p.objective = t.final_objective();
            p.state = t.state;
            p.baseband = t.baseband;
            return p;
        };

        OptimizerConfig comm = cfg;
        comm.objective = ObjectiveKind::SumRate;
        const OptimizationTrace comm_trace = optimize(sc, comm);
        const ParetoPoint comm_point = point_of(1.0, comm_trace);

        OptimizerConfig sense = cfg;
        sense.objective = ObjectiveKind::BeamPatternGain;
        const OptimizationTrace sense_trace = optimize(sc, sense);
        const ParetoPoint sense_point = point_of(0.0, sense_trace);

        ParetoResult out;
        out.rate_ref = comm_point.rate;
        out.power_ref = sense_point.worst_target_power;
        for (double omega : omega_grid)
        {
            if (omega == 1.0)
            {
                out.points.push_back(comm_point);
                continue;
            }
            if (omega == 0.0)
            {
                out.points.push_back(sense_point);
                continue;
            }
            OptimizerConfig w = cfg;
            w.objective = ObjectiveKind::WeightedISAC;
            w.omega = omega;
            w.rate_ref = out.rate_ref;
            w.power_ref = out.power_ref;
            const ReconfigState warm[] = {comm_trace.state, sense_trace.state};
            out.points.push_back(point_of(omega, optimize(sc, w, warm)));
        }
        return out;
    }
}

// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Constrained beamforming over the reconfiguration parameters of every layer.
//
// Each coefficient is driven by one real parameter chosen so the feasible set
// is reached by construction:
//   UnitModulus      q = e^{j phi}
//   Lorentzian       q = (j + e^{j psi}) / 2
//   Amplitude*       q = a, projected onto the range or level set
// Gradients are Wirtinger-calculus backpropagation through the layer chain.

#pragma once

#include "imisac/channel.hpp"
#include "imisac/framework.hpp"
#include "imisac/metrics.hpp"
#include "imisac/projection.hpp"
#include "imisac/random.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imisac
{
    enum class ObjectiveKind { SumRate, BeamPatternGain, WeightedISAC, BeampatternMSE };

    std::string_view to_string(ObjectiveKind k);
    std::optional<ObjectiveKind> parse_objective_kind(std::string_view s);

    struct StepRule
    {
        enum class Kind { Fixed, Backtracking };
        Kind kind = Kind::Backtracking;
        // Fixed: step length eta. Backtracking: length of the first trial step in
        // units of the largest gradient component (radians for phases).
        double initial = 0.5;
        double c = 1e-4;   // Armijo sufficient-increase constant
        double tau = 0.5;  // shrink factor
    };

    struct OptimizerConfig
    {
        ObjectiveKind objective = ObjectiveKind::SumRate;
        double omega = 0.5; // WeightedISAC weight on communication
        int max_iters = 300;
        StepRule step;
        double tolerance = 1e-9; // stop when |f_k - f_{k-1}| <= tolerance * max(1, |f_k|)
        std::uint64_t seed = 1;
        int starts = 4;          // multi-start count
        int outer_rounds = 20;   // alternating optimization
        // WeightedISAC normalization references.
        double rate_ref = 1.0;
        double power_ref = 1.0;
    };

    enum class TraceStatus { Converged, MaxIterations, Stalled };
    std::string_view to_string(TraceStatus s);

    struct OptimizationTrace
    {
        std::vector<double> objective;
        ReconfigState state;
        BasebandProcessor baseband;
        TraceStatus status = TraceStatus::MaxIterations;
        int iterations = 0;

        bool converged() const { return status != TraceStatus::MaxIterations; }
        double final_objective() const { return objective.empty() ? 0.0 : objective.back(); }
    };

    // Everything the objective depends on apart from the reconfiguration state.
    struct Scenario
    {
        ArchitectureSpec spec;
        std::vector<FeedingMatrix> feeds;
        BasebandProcessor baseband;
        ChannelSet channels;
        std::vector<int> stream_to_user; // empty means identity
        // BeampatternMSE only.
        std::vector<CVector> mse_grid;
        std::vector<double> mse_mask;

        std::vector<int> stream_map() const;
    };

    // Objective value and its Wirtinger gradient G = df / d conj(E) for a fixed
    // effective matrix. All objectives are maximized. BeampatternMSE returns
    // -MSE of E rescaled to the power budget.
    double objective_on_matrix(const Scenario &sc, const OptimizerConfig &cfg, const CMatrix &E,
                               CMatrix *grad);

    // ---------------------------------------------------------------------
    // Parameter chart

    // q(theta) for one element of the family, and dq/dtheta at q.
    cplx parameter_coefficient(const ConstraintFamily &family, double theta);
    cplx parameter_derivative(const ConstraintFamily &family, cplx q);

    int parameter_count(const ReconfigState &state);
    RVector state_parameters(const ReconfigState &state);
    // Builds a state from parameters, projecting each onto its family.
    ReconfigState state_from_parameters(const ReconfigState &shape, const RVector &theta);
    // Canonical representative of a parameter vector: phases wrapped to [0, 2 pi),
    // amplitudes projected.
    RVector project_parameters(const ReconfigState &shape, const RVector &theta);

    // Random feasible state: phases uniform on [0, 2 pi), amplitudes mid-range.
    ReconfigState random_state(const ArchitectureSpec &spec, Rng &rng);

    // f(state) and df/dtheta at the state's parameters; grad_V receives
    // df / d conj(V) for the baseband precoder.
    double evaluate_objective(const Scenario &sc, const OptimizerConfig &cfg, const ReconfigState &state,
                              RVector *grad = nullptr, CMatrix *grad_V = nullptr);

    // ---------------------------------------------------------------------
    // Generic projected ascent

    struct SmoothProblem
    {
        // Value at theta; fills grad when non-null.
        std::function<double(const RVector &, RVector *)> evaluate;
        std::function<RVector(const RVector &)> project;
    };

    struct AscentResult
    {
        RVector theta;
        std::vector<double> objective;
        TraceStatus status = TraceStatus::MaxIterations;
        int iterations = 0;
    };

    // Projected gradient ascent with fixed or Armijo-backtracking steps. Under
    // backtracking the objective sequence is nondecreasing; a step shrinking
    // below 1e-12 ends the run as Stalled.
    AscentResult projected_ascent(const SmoothProblem &problem, RVector theta0, const OptimizerConfig &cfg);

    OptimizationTrace gradient_ascent(const Scenario &sc, const ReconfigState &state0, const OptimizerConfig &cfg);

    OptimizationTrace gradient_ascent(const ArchitectureSpec &spec, const BasebandProcessor &V,
                                      std::span<const FeedingMatrix> feeds, const ReconfigState &state0,
                                      const ChannelSet &channels, const OptimizerConfig &cfg);

    // Best of cfg.starts runs from random states seeded by cfg.seed, plus one
    // run from each warm start.
    OptimizationTrace multistart_ascent(const Scenario &sc, const OptimizerConfig &cfg,
                                        std::span<const ReconfigState> warm_starts = {});

    // ---------------------------------------------------------------------
    // Digital precoding

    struct PrecoderReport
    {
        BasebandProcessor baseband;
        std::vector<double> powers;
        double condition_number = 1.0;
    };

    // Zero-forcing directions on the effective channel (U x K) with a ridge of
    // 1e-9 * tr(H H^H) / U, unit-norm columns, water-filling power over the
    // resulting parallel channels. Bisection on the water level stops at 1e-10
    // absolute power residual. Throws SingularEffectiveChannel when the channel
    // condition number exceeds 1e12.
    PrecoderReport zf_waterfilling(const CMatrix &H_eff, double noise_power, double power_budget);

    // Unregularized ZF with equal power per user (pseudo-inverse directions).
    BasebandProcessor zf_equal_power(const CMatrix &H_eff, double power_budget);

    // Water-filling powers for per-channel gains g_u (SNR per unit power).
    std::vector<double> water_filling(std::span<const double> gains, double power_budget);

    // Projected gradient ascent on V over the ball ||V||_F^2 <= power budget,
    // starting from sc.baseband, with the layers fixed at state.
    BasebandProcessor precoder_ascent(const Scenario &sc, const OptimizerConfig &cfg, const ReconfigState &state);

    // Alternates the precoder (ZF water-filling or precoder_ascent, whichever
    // scores higher) with projected gradient on the layers.
    OptimizationTrace alternating_optimize(const Scenario &sc, const OptimizerConfig &cfg,
                                           std::span<const ReconfigState> warm_starts = {});

    // ---------------------------------------------------------------------
    // Gradient checking

    struct GradientReport
    {
        double max_relative_error = 0.0; // max_i |g_i - fd_i| / max(||g||_inf, ||fd||_inf)
        double max_abs_error = 0.0;
        RVector analytic;
        RVector finite_difference;
    };

    GradientReport check_gradient(const std::function<double(const RVector &, RVector *)> &objective,
                                  const RVector &point, double h_fd);

    // ---------------------------------------------------------------------
    // ISAC trade-off

    struct ParetoPoint
    {
        double omega = 0.0;
        double rate = 0.0;
        double worst_target_power = 0.0;
        double objective = 0.0;
        ReconfigState state;
        BasebandProcessor baseband;
    };

    struct ParetoResult
    {
        double rate_ref = 0.0;  // comm-only optimum
        double power_ref = 0.0; // sensing-only optimum
        std::vector<ParetoPoint> points;
    };

    // Runs the architecture's optimizer (alternating when digitally precoded,
    // multi-start gradient ascent otherwise) per weight with a common seed.
    // Intermediate weights are also started from the two single-objective optima.
    ParetoResult pareto_sweep(const Scenario &sc, std::span<const double> omega_grid, const OptimizerConfig &cfg);

    // DMA and RHS carry a digital precoder; Custom architectures do when K > 1.
    bool has_digital_precoding(const ArchitectureSpec &spec);

    // Dispatches to alternating_optimize or multistart_ascent.
    OptimizationTrace optimize(const Scenario &sc, const OptimizerConfig &cfg,
                               std::span<const ReconfigState> warm_starts = {});
}

// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/framework.hpp"
#include "imisac/hash.hpp"
#include "imisac/projection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace imisac
{
    std::string_view to_string(ArchKind k)
    {
        switch (k)
        {
        case ArchKind::RIS: return "RIS";
        case ArchKind::SIM: return "SIM";
        case ArchKind::DMA: return "DMA";
        case ArchKind::RHS: return "RHS";
        case ArchKind::Custom: return "Custom";
        }
        return "Custom";
    }

    std::string_view to_string(FeedTopology t)
    {
        switch (t)
        {
        case FeedTopology::DenseDiffraction: return "DenseDiffraction";
        case FeedTopology::BlockDiagonalWaveguide: return "BlockDiagonalWaveguide";
        case FeedTopology::ScalarCarrier: return "ScalarCarrier";
        }
        return "DenseDiffraction";
    }

    std::string_view to_string(PowerNormalization p)
    {
        switch (p)
        {
        case PowerNormalization::None: return "None";
        case PowerNormalization::EndToEnd: return "EndToEnd";
        case PowerNormalization::PerLayer: return "PerLayer";
        }
        return "None";
    }

    std::string_view to_string(ConstraintFamily::Kind k)
    {
        switch (k)
        {
        case ConstraintFamily::Kind::UnitModulus: return "UnitModulus";
        case ConstraintFamily::Kind::AmplitudeRange: return "AmplitudeRange";
        case ConstraintFamily::Kind::AmplitudeSet: return "AmplitudeSet";
        case ConstraintFamily::Kind::Lorentzian: return "Lorentzian";
        }
        return "UnitModulus";
    }

    std::optional<ArchKind> parse_arch_kind(std::string_view s)
    {
        for (auto k : {ArchKind::RIS, ArchKind::SIM, ArchKind::DMA, ArchKind::RHS, ArchKind::Custom})
            if (to_string(k) == s)
                return k;
        return std::nullopt;
    }

    std::optional<FeedTopology> parse_feed_topology(std::string_view s)
    {
        for (auto t : {FeedTopology::DenseDiffraction, FeedTopology::BlockDiagonalWaveguide, FeedTopology::ScalarCarrier})
            if (to_string(t) == s)
                return t;
        return std::nullopt;
    }

    std::optional<PowerNormalization> parse_power_normalization(std::string_view s)
    {
        for (auto p : {PowerNormalization::None, PowerNormalization::EndToEnd, PowerNormalization::PerLayer})
            if (to_string(p) == s)
                return p;
        return std::nullopt;
    }

    // ---------------------------------------------------------------------
    // ConstraintFamily

    ConstraintFamily ConstraintFamily::amplitude_set(std::vector<double> levels)
    {
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        return {Kind::AmplitudeSet, 0.0, 0.0, std::move(levels)};
    }

    double ConstraintFamily::max_magnitude() const
    {
        switch (kind)
        {
        case Kind::UnitModulus:
        case Kind::Lorentzian: return 1.0;
        case Kind::AmplitudeRange: return hi;
        case Kind::AmplitudeSet: return levels.empty() ? 0.0 : levels.back();
        }
        return 1.0;
    }

    double ConstraintFamily::violation(cplx q) const
    {
        switch (kind)
        {
        case Kind::UnitModulus:
            return std::abs(std::abs(q) - 1.0);
        case Kind::Lorentzian:
            return std::abs(std::abs(q - 0.5 * kJ) - 0.5);
        case Kind::AmplitudeRange:
        {
            const double re = q.real();
            const double out = re < lo ? lo - re : (re > hi ? re - hi : 0.0);
            return std::max(out, std::abs(q.imag()));
        }
        case Kind::AmplitudeSet:
        {
            double best = std::numeric_limits<double>::infinity();
            for (double level : levels)
                best = std::min(best, std::abs(q - cplx{level, 0.0}));
            return best;
        }
        }
        return 0.0;
    }

    bool ConstraintFamily::contains(cplx q, double tol) const { return violation(q) <= tol; }

    cplx ConstraintFamily::project(cplx w) const
    {
        switch (kind)
        {
        case Kind::UnitModulus: return project_unit_modulus(w);
        case Kind::Lorentzian: return project_lorentzian(w);
        default: return {project_amplitude(w, *this), 0.0};
        }
    }

    // ---------------------------------------------------------------------
    // ArchitectureSpec

    bool ArchitectureSpec::has_waveguide() const
    {
        return std::any_of(layers.begin(), layers.end(), [](const LayerSpec &l)
                           { return l.feeding == FeedTopology::BlockDiagonalWaveguide; });
    }

    int ArchitectureSpec::waveguide_of(int layer, int element) const
    {
        const auto &ls = layers.at(static_cast<std::size_t>(layer));
        if (ls.feeding != FeedTopology::BlockDiagonalWaveguide)
            return -1;
        if (!ls.waveguide.empty())
            return element < static_cast<int>(ls.waveguide.size()) ? ls.waveguide[static_cast<std::size_t>(element)] : -1;
        const int k = std::max(num_rf_chains, 1);
        const int per_guide = (ls.elements + k - 1) / k;
        return element / per_guide;
    }

    std::string ArchitectureSpec::hash() const
    {
        Hasher h;
        h.add(to_string(kind)).add(num_rf_chains).add(num_streams);
        h.add(layer_spacing).add(element_spacing_wl).add(carrier_frequency);
        h.add(carrier_attenuation).add(power_budget).add(to_string(normalization));
        h.add(static_cast<std::uint64_t>(source_positions.size()));
        for (const auto &p : source_positions)
            h.add(p);
        h.add(static_cast<std::uint64_t>(layers.size()));
        for (const auto &l : layers)
        {
            h.add(l.elements).add(to_string(l.feeding));
            h.add(to_string(l.constraint.kind)).add(l.constraint.lo).add(l.constraint.hi);
            h.add(static_cast<std::uint64_t>(l.constraint.levels.size()));
            for (double v : l.constraint.levels)
                h.add(v);
            h.add(static_cast<std::uint64_t>(l.positions.size()));
            for (const auto &p : l.positions)
                h.add(p);
            h.add(static_cast<std::uint64_t>(l.waveguide.size()));
            for (int w : l.waveguide)
                h.add(w);
        }
        return h.hex();
    }

    std::vector<Vec3> planar_layout(int elements, double spacing, double z0)
    {
        if (elements <= 0)
            return {};
        const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(elements))));
        const int rows = (elements + cols - 1) / cols;
        return grid_layout(rows, cols, elements, spacing, z0);
    }

    std::vector<Vec3> grid_layout(int rows, int cols, int elements, double spacing, double z0)
    {
        std::vector<Vec3> out;
        if (elements <= 0 || cols <= 0)
            return out;
        const double x0 = 0.5 * (cols - 1) * spacing;
        const double y0 = 0.5 * (rows - 1) * spacing;
        out.reserve(static_cast<std::size_t>(elements));
        for (int n = 0; n < elements; ++n)
            out.emplace_back((n % cols) * spacing - x0, (n / cols) * spacing - y0, z0);
        return out;
    }

    std::vector<Vec3> linear_layout(int elements, double spacing, double z0)
    {
        std::vector<Vec3> out;
        const double x0 = 0.5 * (elements - 1) * spacing;
        for (int n = 0; n < elements; ++n)
            out.emplace_back(n * spacing - x0, 0.0, z0);
        return out;
    }

    ArchitectureSpec make_architecture(const ArchitectureOptions &opt)
    {
        ArchitectureSpec spec;
        spec.kind = opt.kind;
        spec.num_rf_chains = opt.num_rf_chains;
        spec.num_streams = opt.num_streams;
        spec.carrier_frequency = opt.carrier_frequency;
        spec.element_spacing_wl = opt.element_spacing_wl;
        spec.power_budget = opt.power_budget;
        spec.carrier_attenuation = opt.carrier_attenuation;
        spec.normalization = opt.normalization;

        const double lambda = spec.wavelength();
        spec.layer_spacing = opt.layer_spacing_wl * lambda;
        spec.source_positions = linear_layout(opt.num_rf_chains, 0.5 * lambda, 0.0);

        ConstraintFamily family;
        FeedTopology first_feed = FeedTopology::DenseDiffraction;
        switch (opt.kind)
        {
        case ArchKind::RIS:
            first_feed = FeedTopology::ScalarCarrier;
            break;
        case ArchKind::DMA:
            family = ConstraintFamily::lorentzian();
            first_feed = FeedTopology::BlockDiagonalWaveguide;
            break;
        case ArchKind::RHS:
            family = ConstraintFamily::amplitude_range(0.0, 1.0);
            first_feed = FeedTopology::BlockDiagonalWaveguide;
            break;
        default:
            break;
        }
        if (opt.constraint)
            family = *opt.constraint;

        for (std::size_t l = 0; l < opt.elements_per_layer.size(); ++l)
        {
            LayerSpec layer;
            layer.elements = opt.elements_per_layer[l];
            layer.feeding = l == 0 ? first_feed : FeedTopology::DenseDiffraction;
            layer.constraint = family;
            const double z = static_cast<double>(l + 1) * spec.layer_spacing;
            const double spacing = opt.element_spacing_wl * lambda;
            if (layer.feeding == FeedTopology::BlockDiagonalWaveguide)
            {
                // One row of elements per waveguide, matching the contiguous assignment.
                const int k = std::max(opt.num_rf_chains, 1);
                const int per_guide = (layer.elements + k - 1) / k;
                layer.positions = grid_layout(k, per_guide, layer.elements, spacing, z);
            }
            else
            {
                layer.positions = planar_layout(layer.elements, spacing, z);
            }
            spec.layers.push_back(std::move(layer));
        }
        return spec;
    }

    // ---------------------------------------------------------------------
    // Validation

    std::string ValidationReport::summary() const
    {
        std::ostringstream os;
        for (std::size_t i = 0; i < violations.size(); ++i)
        {
            if (i)
                os << "; ";
            os << violations[i].path << ": " << violations[i].message;
        }
        return os.str();
    }

    ValidationReport validate_architecture(const ArchitectureSpec &spec)
    {
        ValidationReport report;
        auto add = [&](std::string path, std::string msg)
        { report.violations.push_back({std::move(path), std::move(msg)}); };
        auto layer_path = [](std::size_t l, const char *field)
        { return "layers[" + std::to_string(l) + "]." + field; };

        const int L = spec.num_layers();
        const int K = spec.num_rf_chains;
        const int S = spec.num_streams;

        if (L < 1)
            add("layers", "at least one metasurface layer is required");
        if (K < 1)
            add("num_rf_chains", "must be positive");
        if (S < 1)
            add("num_streams", "must be positive");
        if (S > K)
            add("num_streams", "stream count exceeds RF chain count");
        if (!(spec.carrier_frequency > 0.0) || !std::isfinite(spec.carrier_frequency))
            add("carrier_frequency", "must be positive");
        if (!(spec.power_budget > 0.0))
            add("power_budget", "must be positive");
        if (!(spec.element_spacing_wl > 0.0))
            add("geometry.element_spacing_wavelengths", "must be positive");

        for (std::size_t l = 0; l < spec.layers.size(); ++l)
        {
            const auto &layer = spec.layers[l];
            if (layer.elements < 1)
                add(layer_path(l, "elements"), "must be positive");
            if (static_cast<int>(layer.positions.size()) != layer.elements)
                add(layer_path(l, "positions"), "position count differs from element count");

            const auto &c = layer.constraint;
            if (c.kind == ConstraintFamily::Kind::AmplitudeRange && !(c.lo <= c.hi && c.lo >= 0.0))
                add(layer_path(l, "constraint"), "amplitude range needs 0 <= lo <= hi");
            if (c.kind == ConstraintFamily::Kind::AmplitudeSet &&
                (c.levels.empty() || c.levels.front() < 0.0))
                add(layer_path(l, "constraint"), "amplitude set needs nonnegative levels");

            if (l > 0 && layer.feeding != FeedTopology::DenseDiffraction)
                add(layer_path(l, "feeding"), "inter-layer feeding must be DenseDiffraction");
            if (l == 0 && layer.feeding == FeedTopology::ScalarCarrier && K != 1)
                add(layer_path(l, "feeding"), "ScalarCarrier feeding needs a single RF chain");
            if (layer.feeding == FeedTopology::DenseDiffraction && l > 0 && !(spec.layer_spacing > 0.0))
                add("geometry.layer_spacing", "must be positive for diffraction feeding");
            if (l == 0 && layer.feeding == FeedTopology::DenseDiffraction &&
                static_cast<int>(spec.source_positions.size()) != K)
                add("geometry.source_positions", "one source position per RF chain is required");

            if (layer.feeding == FeedTopology::BlockDiagonalWaveguide)
            {
                if (K > layer.elements)
                    add("num_rf_chains", "waveguide feeding needs K <= N_1");
                if (!layer.waveguide.empty() && static_cast<int>(layer.waveguide.size()) != layer.elements)
                    add(layer_path(l, "waveguide"), "assignment length differs from element count");
                for (std::size_t n = 0; n < layer.waveguide.size(); ++n)
                    if (layer.waveguide[n] < 0 || layer.waveguide[n] >= K)
                    {
                        add(layer_path(l, "waveguide") + "[" + std::to_string(n) + "]",
                            "element not assigned to a valid waveguide");
                        break;
                    }
            }
        }

        auto all_layers = [&](auto pred)
        { return std::all_of(spec.layers.begin(), spec.layers.end(), pred); };
        using CK = ConstraintFamily::Kind;

        switch (spec.kind)
        {
        case ArchKind::RIS:
            if (K != 1)
                add("num_rf_chains", "RIS requires single RF chain");
            if (!all_layers([](const LayerSpec &l) { return l.feeding == FeedTopology::ScalarCarrier; }))
                add("layers.feeding", "RIS requires ScalarCarrier feeding");
            if (!all_layers([](const LayerSpec &l) { return l.constraint.kind == CK::UnitModulus; }))
                add("layers.constraint", "RIS requires UnitModulus");
            break;
        case ArchKind::RHS:
            if (!all_layers([](const LayerSpec &l) { return l.constraint.is_amplitude(); }))
                add("layers.constraint", "RHS requires amplitude-only control (AmplitudeRange or AmplitudeSet)");
            break;
        case ArchKind::DMA:
            if (!all_layers([](const LayerSpec &l) { return l.constraint.kind == CK::Lorentzian; }))
                add("layers.constraint", "DMA requires Lorentzian");
            if (!all_layers([](const LayerSpec &l) { return l.feeding == FeedTopology::BlockDiagonalWaveguide; }))
                add("layers.feeding", "DMA requires BlockDiagonalWaveguide feeding");
            break;
        case ArchKind::SIM:
            if (!all_layers([](const LayerSpec &l) { return l.constraint.kind == CK::UnitModulus; }))
                add("layers.constraint", "SIM requires UnitModulus");
            if (!all_layers([](const LayerSpec &l) { return l.feeding == FeedTopology::DenseDiffraction; }))
                add("layers.feeding", "SIM requires DenseDiffraction feeding on every layer");
            break;
        case ArchKind::Custom:
            break;
        }
        return report;
    }

    // ---------------------------------------------------------------------
    // Baseband and state

    BasebandProcessor BasebandProcessor::equal_power(int rf_chains, int streams, double budget)
    {
        BasebandProcessor bp;
        bp.total_power_budget = budget;
        bp.V = CMatrix::Identity(rf_chains, streams) * std::sqrt(budget / streams);
        return bp;
    }

    BasebandProcessor BasebandProcessor::power_allocation(std::span<const double> powers, double budget)
    {
        BasebandProcessor bp;
        bp.total_power_budget = budget;
        const auto n = static_cast<Eigen::Index>(powers.size());
        bp.V = CMatrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            if (powers[static_cast<std::size_t>(i)] < 0.0)
                fail(ErrorCode::InvalidArgument, "power allocation entries must be nonnegative");
            bp.V(i, i) = std::sqrt(powers[static_cast<std::size_t>(i)]);
        }
        return bp;
    }

    double ReconfigState::max_violation() const
    {
        double worst = 0.0;
        for (const auto &l : layers)
            for (Eigen::Index n = 0; n < l.q.size(); ++n)
                worst = std::max(worst, l.family.violation(l.q(n)));
        return worst;
    }

    std::string ReconfigState::hash() const
    {
        Hasher h;
        h.add(static_cast<std::uint64_t>(layers.size()));
        for (const auto &l : layers)
        {
            h.add(to_string(l.family.kind));
            h.add(CMatrix(l.q));
        }
        return h.hex();
    }

    ReconfigState initial_state(const ArchitectureSpec &spec)
    {
        ReconfigState state;
        for (const auto &layer : spec.layers)
        {
            LayerState ls;
            ls.family = layer.constraint;
            cplx q{1.0, 0.0};
            switch (layer.constraint.kind)
            {
            case ConstraintFamily::Kind::UnitModulus: q = 1.0; break;
            case ConstraintFamily::Kind::Lorentzian: q = lorentzian_point(0.0); break;
            case ConstraintFamily::Kind::AmplitudeRange:
            case ConstraintFamily::Kind::AmplitudeSet:
            {
                const auto &c = layer.constraint;
                const double mid = c.kind == ConstraintFamily::Kind::AmplitudeRange
                                       ? 0.5 * (c.lo + c.hi)
                                       : 0.5 * (c.levels.front() + c.levels.back());
                q = c.project(mid);
                break;
            }
            }
            ls.q = CVector::Constant(layer.elements, q);
            state.layers.push_back(std::move(ls));
        }
        return state;
    }

    ReconfigState apply_parameters(const ReconfigState &state, int layer, std::span<const ParamPair> raw)
    {
        if (layer < 0 || layer >= state.num_layers())
            fail(ErrorCode::LayerOutOfRange, "layer " + std::to_string(layer) + " out of range [0, " +
                                                 std::to_string(state.num_layers()) + ")");
        ReconfigState out = state;
        auto &ls = out.layers[static_cast<std::size_t>(layer)];
        if (static_cast<Eigen::Index>(raw.size()) != ls.q.size())
            fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(layer) + " expects " +
                                                   std::to_string(ls.q.size()) + " parameters, got " +
                                                   std::to_string(raw.size()));
        for (std::size_t n = 0; n < raw.size(); ++n)
        {
            const auto [phase, amplitude] = raw[n];
            cplx q;
            switch (ls.family.kind)
            {
            case ConstraintFamily::Kind::UnitModulus: q = std::polar(1.0, phase); break;
            case ConstraintFamily::Kind::Lorentzian: q = lorentzian_point(phase); break;
            default: q = project_amplitude(cplx{std::abs(amplitude), 0.0}, ls.family); break;
            }
            ls.q(static_cast<Eigen::Index>(n)) = q;
        }
        return out;
    }

    // ---------------------------------------------------------------------
    // Composition

    void check_dimensions(const ArchitectureSpec &spec, const BasebandProcessor &V,
                          std::span<const FeedingMatrix> feeds, const ReconfigState &state)
    {
        const auto L = static_cast<std::size_t>(spec.num_layers());
        if (feeds.size() != L)
            fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(L) + " feeding matrices, got " +
                                                   std::to_string(feeds.size()));
        if (state.layers.size() != L)
            fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(L) + " state layers, got " +
                                                   std::to_string(state.layers.size()));
        if (V.V.rows() != spec.num_rf_chains || V.V.cols() != spec.num_streams)
            fail(ErrorCode::DimensionMismatch, "baseband matrix must be " + std::to_string(spec.num_rf_chains) +
                                                   "x" + std::to_string(spec.num_streams));
        Eigen::Index inputs = spec.num_rf_chains;
        for (std::size_t l = 0; l < L; ++l)
        {
            const auto N = static_cast<Eigen::Index>(spec.layers[l].elements);
            const auto &T = feeds[l].T;
            if (T.rows() != N || T.cols() != inputs)
                fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": feeding matrix is " +
                                                       std::to_string(T.rows()) + "x" + std::to_string(T.cols()) +
                                                       ", expected " + std::to_string(N) + "x" +
                                                       std::to_string(inputs));
            if (state.layers[l].q.size() != N)
                fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": state has " +
                                                       std::to_string(state.layers[l].q.size()) +
                                                       " coefficients, expected " + std::to_string(N));
            inputs = N;
        }
    }

    CMatrix layer_product(std::span<const FeedingMatrix> feeds, const ReconfigState &state)
    {
        if (feeds.empty() || feeds.size() != state.layers.size())
            fail(ErrorCode::DimensionMismatch, "feeds and state layer counts differ");
        CMatrix M = state.layers[0].q.asDiagonal() * feeds[0].T;
        for (std::size_t l = 1; l < feeds.size(); ++l)
        {
            if (feeds[l].T.cols() != M.rows())
                fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": feeding matrix columns do not match previous layer");
            M = state.layers[l].q.asDiagonal() * (feeds[l].T * M);
        }
        return M;
    }

    EffectiveTransmitMatrix build_effective_matrix(const ArchitectureSpec &spec, const BasebandProcessor &V,
                                                   std::span<const FeedingMatrix> feeds,
                                                   const ReconfigState &state)
    {
        if (auto report = validate_architecture(spec); !report.ok())
            fail(ErrorCode::ValidationError, report.summary());
        check_dimensions(spec, V, feeds, state);

        for (std::size_t l = 0; l < state.layers.size(); ++l)
        {
            const auto &ls = state.layers[l];
            for (Eigen::Index n = 0; n < ls.q.size(); ++n)
            {
                const double v = ls.family.violation(ls.q(n));
                if (!(v <= kBuildConstraintTolerance))
                {
                    std::ostringstream os;
                    os << "layer " << l << " element " << n << " violates " << to_string(ls.family.kind)
                       << " by " << v;
                    fail(ErrorCode::ConstraintViolation, os.str());
                }
            }
        }

        // Propagate the K x S block through the layers; never forms the N x K chain.
        CMatrix X = V.V;
        for (std::size_t l = 0; l < feeds.size(); ++l)
            X = state.layers[l].q.asDiagonal() * (feeds[l].T * X);

        if (spec.normalization == PowerNormalization::EndToEnd)
        {
            const double norm = X.norm();
            if (norm > 0.0)
                X *= std::sqrt(spec.power_budget) / norm;
        }
        return {std::move(X), spec.hash(), state.hash()};
    }
}

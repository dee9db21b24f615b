// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Unified transceiver data model. A transmitter is described as three slices:
// baseband processing V (K x S), per-layer RF feeding T_l and per-layer diagonal
// reconfiguration Q_l. The radiating aperture sees
//
//     E = Q_L T_L ... Q_2 T_2 Q_1 T_1 V        (N_L x S)
//
// which drives both the user signal H E x + n and the sensing beam pattern
// a^H E E^H a.

#pragma once

#include "imisac/common.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imisac
{
    enum class ArchKind { RIS, SIM, DMA, RHS, Custom };
    enum class FeedTopology { DenseDiffraction, BlockDiagonalWaveguide, ScalarCarrier };
    enum class PowerNormalization { None, EndToEnd, PerLayer };

    std::string_view to_string(ArchKind k);
    std::string_view to_string(FeedTopology t);
    std::string_view to_string(PowerNormalization p);
    std::optional<ArchKind> parse_arch_kind(std::string_view s);
    std::optional<FeedTopology> parse_feed_topology(std::string_view s);
    std::optional<PowerNormalization> parse_power_normalization(std::string_view s);

    // Feasible set of one element's complex coefficient q.
    struct ConstraintFamily
    {
        enum class Kind { UnitModulus, AmplitudeRange, AmplitudeSet, Lorentzian };

        Kind kind = Kind::UnitModulus;
        double lo = 0.0;            // AmplitudeRange
        double hi = 1.0;            // AmplitudeRange
        std::vector<double> levels; // AmplitudeSet, ascending

        static ConstraintFamily unit_modulus() { return {}; }
        static ConstraintFamily lorentzian() { return {Kind::Lorentzian, 0.0, 0.0, {}}; }
        static ConstraintFamily amplitude_range(double lo, double hi) { return {Kind::AmplitudeRange, lo, hi, {}}; }
        static ConstraintFamily amplitude_set(std::vector<double> levels);

        bool is_amplitude() const { return kind == Kind::AmplitudeRange || kind == Kind::AmplitudeSet; }
        // Largest |q| reachable in this family.
        double max_magnitude() const;
        bool contains(cplx q, double tol) const;
        // Distance of q from the feasible set (0 when feasible).
        double violation(cplx q) const;
        cplx project(cplx w) const;

        bool operator==(const ConstraintFamily &) const = default;
    };

    std::string_view to_string(ConstraintFamily::Kind k);

    struct LayerSpec
    {
        int elements = 1;
        FeedTopology feeding = FeedTopology::DenseDiffraction;
        ConstraintFamily constraint;
        std::vector<Vec3> positions; // meters, one per element
        // Waveguide index per element (BlockDiagonalWaveguide only). Empty means
        // contiguous blocks of ceil(N / K) elements.
        std::vector<int> waveguide;
    };

    struct ArchitectureSpec
    {
        ArchKind kind = ArchKind::Custom;
        std::vector<LayerSpec> layers;
        int num_rf_chains = 1;
        int num_streams = 1;
        std::vector<Vec3> source_positions; // RF-chain feed points, meters
        double layer_spacing = 0.0;         // meters
        double element_spacing_wl = 0.5;    // wavelengths
        double carrier_frequency = 28e9;    // Hz
        double carrier_attenuation = 1.0;   // ScalarCarrier factor tau
        double power_budget = 1.0;          // watts
        PowerNormalization normalization = PowerNormalization::None;

        int num_layers() const { return static_cast<int>(layers.size()); }
        int elements(int layer) const { return layers.at(static_cast<std::size_t>(layer)).elements; }
        int aperture_elements() const { return layers.empty() ? 0 : layers.back().elements; }
        double wavelength() const { return kSpeedOfLight / carrier_frequency; }
        bool has_waveguide() const;
        // Index of the waveguide element n sits on (-1 if none).
        int waveguide_of(int layer, int element) const;
        std::string hash() const;
    };

    // Centered rectangular grid in the plane z = z0; ceil(sqrt(N)) columns.
    std::vector<Vec3> planar_layout(int elements, double spacing, double z0);
    // Row-major rows x cols grid holding the first `elements` points, centered.
    std::vector<Vec3> grid_layout(int rows, int cols, int elements, double spacing, double z0);
    // Line of points along x, centered, in the plane z = z0.
    std::vector<Vec3> linear_layout(int elements, double spacing, double z0);

    // Canonical geometry: sources at z = 0 (half-wavelength line), layer l at
    // z = (l + 1) * layer_spacing, elements on a planar grid.
    struct ArchitectureOptions
    {
        ArchKind kind = ArchKind::SIM;
        std::vector<int> elements_per_layer{16};
        int num_rf_chains = 1;
        int num_streams = 1;
        double carrier_frequency = 28e9;
        double element_spacing_wl = 0.5;
        double layer_spacing_wl = 0.5; // in wavelengths
        std::optional<ConstraintFamily> constraint; // default per kind
        PowerNormalization normalization = PowerNormalization::None;
        double power_budget = 1.0;
        double carrier_attenuation = 1.0;
    };

    ArchitectureSpec make_architecture(const ArchitectureOptions &opt);

    struct Violation
    {
        std::string path;
        std::string message;
    };

    struct ValidationReport
    {
        std::vector<Violation> violations;
        bool ok() const { return violations.empty(); }
        std::string summary() const;
    };

    ValidationReport validate_architecture(const ArchitectureSpec &spec);

    struct BasebandProcessor
    {
        CMatrix V; // K x S
        double total_power_budget = 1.0;

        double power() const { return V.squaredNorm(); }
        bool within_budget(double tol = 1e-12) const { return power() <= total_power_budget * (1.0 + tol); }

        // sqrt(p / S) I_{K x S}: equal power over the streams.
        static BasebandProcessor equal_power(int rf_chains, int streams, double budget);
        // diag(sqrt(p_s)); total power sum(p_s).
        static BasebandProcessor power_allocation(std::span<const double> powers, double budget);
    };

    struct FeedingMatrix
    {
        int layer = 0;
        CMatrix T; // N_l x M, M = K for layer 0, N_{l-1} otherwise
        FeedTopology topology = FeedTopology::DenseDiffraction;
    };

    struct LayerState
    {
        ConstraintFamily family;
        CVector q;
    };

    struct ReconfigState
    {
        std::vector<LayerState> layers;

        int num_layers() const { return static_cast<int>(layers.size()); }
        // Largest distance of any coefficient from its family's feasible set.
        double max_violation() const;
        std::string hash() const;
    };

    // Every layer at the family's reference point: q = 1 (unit modulus),
    // psi = 0 on the Lorentzian circle, mid-range amplitude.
    ReconfigState initial_state(const ArchitectureSpec &spec);

    struct ParamPair
    {
        double phase = 0.0;
        double amplitude = 1.0;
    };

    // Returns a copy of state with one layer replaced. Unit-modulus layers keep
    // the phase, Lorentzian layers read the phase as the circle parameter psi
    // (q = (j + e^{j psi}) / 2), amplitude families clamp |amplitude|.
    ReconfigState apply_parameters(const ReconfigState &state, int layer, std::span<const ParamPair> raw);

    struct EffectiveTransmitMatrix
    {
        CMatrix E; // N_L x S
        std::string spec_hash;
        std::string state_hash;
    };

    inline constexpr double kBuildConstraintTolerance = 1e-9;

    // Q_L T_L ... Q_1 T_1 (N_L x K); the part of the chain below baseband.
    CMatrix layer_product(std::span<const FeedingMatrix> feeds, const ReconfigState &state);

    // Checks layer chaining; throws DimensionMismatch naming the layer.
    void check_dimensions(const ArchitectureSpec &spec, const BasebandProcessor &V,
                          std::span<const FeedingMatrix> feeds, const ReconfigState &state);

    EffectiveTransmitMatrix build_effective_matrix(const ArchitectureSpec &spec, const BasebandProcessor &V,
                                                   std::span<const FeedingMatrix> feeds,
                                                   const ReconfigState &state);
}

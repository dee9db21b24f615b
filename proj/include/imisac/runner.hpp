// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Scenario files, command execution and result persistence.
//
// A scenario is one JSON document with a "$schema_version" field. Unknown
// fields are rejected unless lenient parsing is requested. Every result
// embeds the config hash and the library version; doubles are written in
// shortest round-trip form so reruns compare byte for byte.

#pragma once

#include "imisac/channel.hpp"
#include "imisac/estimate.hpp"
#include "imisac/framework.hpp"
#include "imisac/metrics.hpp"
#include "imisac/optimize.hpp"
#include "imisac/waveform.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imisac
{
    inline constexpr int kSchemaVersion = 1;

    // Error carrying every field-level problem found in a scenario.
    class ConfigError : public Error
    {
    public:
        ConfigError(ErrorCode code, const std::string &message, std::vector<Violation> violations = {})
            : Error(code, message), violations_(std::move(violations)) {}

        const std::vector<Violation> &violations() const { return violations_; }

    private:
        std::vector<Violation> violations_;
    };

    struct ArchitectureConfig
    {
        ArchKind kind = ArchKind::SIM;
        std::vector<int> elements_per_layer{16};
        int rf_chains = 1;
        int streams = 1;
        double carrier_frequency = 28e9;
        double element_spacing_wl = 0.5;
        double layer_spacing_wl = 0.5;
        std::optional<ConstraintFamily> constraint;
        std::vector<FeedTopology> feeding; // per-layer override; empty keeps defaults
        PowerNormalization normalization = PowerNormalization::None;
        double power_budget = 1.0;
        double carrier_attenuation = 1.0;
        FeedOptions feed;
    };

    // Explicit points, or `count` points drawn per seed inside the ranges.
    struct Placement
    {
        struct Point
        {
            double azimuth_deg = 0.0;
            double elevation_deg = 0.0;
            double distance_m = 20.0;
        };
        std::vector<Point> points;
        int count = 0;
        double azimuth_lo_deg = -60.0;
        double azimuth_hi_deg = 60.0;
        double distance_lo_m = 10.0;
        double distance_hi_m = 30.0;

        bool random() const { return points.empty(); }
        int size() const { return random() ? count : static_cast<int>(points.size()); }
    };

    struct ChannelConfig
    {
        ChannelModel model;
        Placement users;
        Placement targets;
        std::optional<CMatrix> H; // explicit U x N_L channel
        std::optional<double> noise_power;
        double snr_db = 10.0;
        double snr_reference_m = 20.0;       // noise = (free-space gain at this range)^2 / SNR
        double mask_halfwidth_deg = 5.0;     // BeampatternMSE mask around each target
        double pattern_lo_deg = -90.0;
        double pattern_hi_deg = 90.0;
        int pattern_points = 181;
    };

    struct StateConfig
    {
        enum class Mode { Initial, Random, Explicit };
        Mode mode = Mode::Initial;
        std::vector<std::vector<double>> layers; // raw parameter per element
    };

    struct EstimationConfig
    {
        std::vector<int> slots{8, 10, 16, 32};
        std::optional<double> snr_db = 20.0; // none means noiseless
        double ridge = 0.0;
        int trials = 50;
        bool orthonormalize = false;
    };

    struct WaveformConfig
    {
        int slots = 8;
        double period = 1e-6;
        double sense_azimuth_deg = 30.0;
        double sense_elevation_deg = 0.0;
        double comm_weight = 1.0;
        double sense_weight = 1.0;
        std::optional<double> comm_magnitude;
        std::vector<double> comm_phases; // empty: matched to user 0
    };

    struct SweepConfig
    {
        std::vector<int> elements_per_layer;
        std::vector<int> layers;
        std::vector<double> omega;
        std::optional<int> fixed_total_elements;
    };

    struct ScenarioConfig
    {
        int schema_version = kSchemaVersion;
        std::string name;
        ArchitectureConfig architecture;
        ChannelConfig channel;
        OptimizerConfig optimizer;
        StateConfig state;
        EstimationConfig estimation;
        WaveformConfig waveform;
        SweepConfig sweep;
        std::vector<std::uint64_t> seeds{1};
        std::string output_dir = "out";

        std::string hash() const;
    };

    struct LoadOptions
    {
        bool strict = true;
        std::vector<std::string> *warnings = nullptr; // unknown fields when lenient
    };

    ScenarioConfig parse_scenario(std::string_view json_text, const LoadOptions &opt = {});
    ScenarioConfig load_scenario(const std::filesystem::path &path, const LoadOptions &opt = {});
    std::string serialize_scenario(const ScenarioConfig &cfg);

    // Architecture, feeds and per-seed channel realization.
    ArchitectureSpec build_spec(const ArchitectureConfig &cfg);
    Scenario build_scenario(const ScenarioConfig &cfg, std::uint64_t seed);

    // Azimuth cut of the beam pattern at elevation 0.
    std::vector<PatternSample> pattern_cut(const ScenarioConfig &cfg, const ArchitectureSpec &spec, const CMatrix &E);

    // ---------------------------------------------------------------------
    // Plot data

    enum class PlotKind { SeVsElements, Pareto, Beampattern, NmseVsT };
    std::string_view to_string(PlotKind k);

    struct PlotRecord
    {
        PlotKind kind = PlotKind::Beampattern;
        std::string label;
        std::map<std::string, double> values;
    };

    // Header for each kind:
    //   se_vs_elements  label,layers,elements_per_layer,sum_rate_mean,sum_rate_std,seeds
    //   pareto          label,omega,sum_rate,worst_target_power
    //   beampattern     angle_deg,power,label
    //   nmse_vs_T       label,slots,nmse_mean,seeds
    std::vector<std::string> plot_columns(PlotKind k);
    std::string emit_plotdata(std::span<const PlotRecord> records, PlotKind kind);

    // Shortest round-trip decimal form.
    std::string format_double(double v);

    // ---------------------------------------------------------------------
    // Commands

    enum class Command { Simulate, Optimize, Estimate, Waveform, Sweep, Pareto };
    std::string_view to_string(Command c);
    std::optional<Command> parse_command(std::string_view s);

    struct RunOptions
    {
        int threads = 1;
    };

    struct RunOutput
    {
        std::string result_json;                      // result.json contents
        std::map<std::string, std::string> side_files; // file name -> contents
    };

    RunOutput run(Command command, const ScenarioConfig &cfg, const RunOptions &opt = {});

    // Writes result.json and the side files into dir.
    void write_output(const RunOutput &out, const std::filesystem::path &dir);

    std::string error_json(const Error &e);
}

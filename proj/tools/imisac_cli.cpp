// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------
//
// Command-line front end. Every subcommand reads a scenario file, runs, and
// writes result.json plus CSV side files into the output directory. On any
// module error it prints an error document to stdout and exits with status 1.
//
// Environment overrides (flags win): IMISAC_CONFIG, IMISAC_SEED, IMISAC_OUT,
// IMISAC_THREADS.

#include "imisac/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

namespace
{
    struct Args
    {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::string out;
        int threads = 1;
        bool strict = false;
        bool lenient = false;
    };

    void add_common(CLI::App *cmd, Args &a)
    {
        cmd->add_option("--config,-c", a.config, "Scenario JSON file")->required()->envname("IMISAC_CONFIG");
        cmd->add_option("--seed", a.seed, "Run a single seed instead of the scenario's seed list")
            ->envname("IMISAC_SEED");
        cmd->add_option("--out,-o", a.out, "Output directory (default: scenario output_dir)")->envname("IMISAC_OUT");
        cmd->add_option("--threads,-j", a.threads, "Worker threads for independent seeds and sweep points")
            ->check(CLI::Range(0, 256))
            ->envname("IMISAC_THREADS");
        auto *strict = cmd->add_flag("--strict", a.strict, "Reject unknown scenario fields (default)");
        cmd->add_flag("--lenient", a.lenient, "Warn about unknown scenario fields instead of failing")
            ->excludes(strict);
    }

    int execute(std::optional<imisac::Command> command, const Args &a)
    {
        try
        {
            std::vector<std::string> warnings;
            const imisac::ScenarioConfig loaded =
                imisac::load_scenario(a.config, {.strict = !a.lenient, .warnings = &warnings});
            for (const auto &w : warnings)
                std::cerr << "warning: " << w << "\n";
            imisac::ScenarioConfig cfg = loaded;
            if (a.seed)
                cfg.seeds = {*a.seed};
            if (!command)
            {
                std::cout << "{\"valid\": true, \"config_hash\": \"" << cfg.hash() << "\"}\n";
                return 0;
            }
            int threads = a.threads;
            if (threads == 0)
                threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
            const imisac::RunOutput out = imisac::run(*command, cfg, {.threads = threads});
            const std::string dir = a.out.empty() ? cfg.output_dir : a.out;
            imisac::write_output(out, dir);
            std::cerr << imisac::to_string(*command) << ": wrote " << dir << "/result.json";
            if (!out.side_files.empty())
                std::cerr << " and " << out.side_files.size() << " CSV file(s)";
            std::cerr << "\n";
            return 0;
        }
        catch (const imisac::Error &e)
        {
            std::cout << imisac::error_json(e);
            return 1;
        }
        catch (const std::exception &e)
        {
            std::cout << imisac::error_json(imisac::Error(imisac::ErrorCode::InvalidArgument, e.what()));
            return 1;
        }
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"imisac: metasurface ISAC transceiver simulator"};
    app.set_version_flag("--version", std::string(imisac::library_version()));
    app.require_subcommand(1);

    Args args;
    struct Sub
    {
        const char *name;
        const char *help;
        std::optional<imisac::Command> command;
    };
    const Sub subs[] = {
        {"simulate", "Metrics for the configured fixed state", imisac::Command::Simulate},
        {"optimize", "Optimize the reconfiguration (and precoder) for the configured objective",
         imisac::Command::Optimize},
        {"estimate", "Multi-slot pilot channel estimation over the configured slot counts",
         imisac::Command::Estimate},
        {"waveform", "Time-modulated split design: DC for communication, harmonic 1 for sensing",
         imisac::Command::Waveform},
        {"sweep", "Optimized sum rate over layer counts and elements per layer", imisac::Command::Sweep},
        {"pareto", "Communication/sensing trade-off over the configured weight grid", imisac::Command::Pareto},
        {"validate", "Parse and validate a scenario without running it", std::nullopt},
    };

    std::optional<imisac::Command> selected;
    bool chosen = false;
    for (const auto &s : subs)
    {
        CLI::App *cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, args);
        cmd->callback([&, c = s.command] {
            selected = c;
            chosen = true;
        });
    }

    CLI11_PARSE(app, argc, argv);
    if (!chosen)
        return 2;
    return execute(selected, args);
}

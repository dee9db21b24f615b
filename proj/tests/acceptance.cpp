// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "imisac/channel.hpp"
#include "imisac/estimate.hpp"
#include "imisac/metrics.hpp"
#include "imisac/optimize.hpp"
#include "imisac/projection.hpp"
#include "imisac/random.hpp"
#include "imisac/runner.hpp"
#include "imisac/waveform.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace imisac;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace
{
    const std::string kRoot = IMISAC_SOURCE_DIR;

    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    std::string fmt(const char *f, auto... args)
    {
        char buf[512];
        std::snprintf(buf, sizeof buf, f, args...);
        return buf;
    }

    CMatrix gaussian(Rng &rng, Eigen::Index r, Eigen::Index c) { return rng.complex_normal(r, c); }
    CVector gaussian(Rng &rng, Eigen::Index n) { return rng.complex_normal(n, 1).col(0); }

    double mean(const std::vector<double> &v)
    {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    }

    std::string read_file(const fs::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    // 1. Layer/element trend and the ISAC trade-off on the reference scenario.
    Outcome trend()
    {
        const ScenarioConfig cfg = load_scenario(kRoot + "/scenarios/sim_fig3_trend.json");
        const json sweep = json::parse(run(Command::Sweep, cfg).result_json);

        std::map<int, std::vector<std::pair<int, json>>> by_layers;
        for (const json &row : sweep["results"])
            by_layers[row["layers"].get<int>()].emplace_back(row["elements_per_layer"].get<int>(), row);

        bool monotone = true;
        std::string means;
        for (auto &[L, rows] : by_layers)
        {
            std::sort(rows.begin(), rows.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
            means += fmt(" L=%d:", L);
            for (std::size_t i = 0; i < rows.size(); ++i)
            {
                const double m = rows[i].second["sum_rate_mean"].get<double>();
                means += fmt(" %.3f", m);
                if (i > 0 && m < rows[i - 1].second["sum_rate_mean"].get<double>())
                    monotone = false;
            }
        }

        auto at = [&](int L, int N) -> std::vector<double>
        {
            for (const auto &[n, row] : by_layers[L])
                if (n == N)
                    return row["sum_rate"].get<std::vector<double>>();
            return {};
        };
        const std::vector<double> deep = at(6, 25), shallow = at(2, 25);
        double p = 1.0;
        if (!deep.empty() && deep.size() == shallow.size())
        {
            std::vector<double> d(deep.size());
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] = deep[i] - shallow[i];
            const double m = mean(d);
            double var = 0.0;
            for (double x : d)
                var += (x - m) * (x - m);
            var /= static_cast<double>(d.size() - 1);
            const double t = m / std::sqrt(var / static_cast<double>(d.size()));
            p = boost::math::cdf(boost::math::complement(
                boost::math::students_t(static_cast<double>(d.size() - 1)), t));
        }

        const json pareto = json::parse(run(Command::Pareto, cfg).result_json);
        std::vector<double> rate, rate_ref, worst, iso;
        int per_seed = 0, seeds = 0;
        for (const json &r : pareto["results"])
            for (const json &pt : r["points"])
                if (std::abs(pt["omega"].get<double>() - 0.8) < 1e-12)
                {
                    ++seeds;
                    rate.push_back(pt["sum_rate"]);
                    rate_ref.push_back(r["rate_ref"]);
                    worst.push_back(pt["worst_target_power"]);
                    iso.push_back(pt["isotropic_power"]);
                    per_seed += rate.back() >= 0.7 * rate_ref.back() && worst.back() >= 5.0 * iso.back();
                }
        const double rate_ratio = seeds ? mean(rate) / mean(rate_ref) : 0.0;
        const double gain_ratio = seeds ? mean(worst) / mean(iso) : 0.0;
        const bool tradeoff = seeds > 0 && rate_ratio >= 0.7 && gain_ratio >= 5.0;

        return {monotone && p < 0.05 && tradeoff,
                fmt("means%s; paired t-test L=6 vs L=2 at N=25 p=%.3g; omega=0.8 mean rate/ref=%.3f, "
                    "mean power/isotropic=%.2f (%d/%d seeds individually)",
                    means.c_str(), p, rate_ratio, gain_ratio, per_seed, seeds)};
    }

    // 2. Beam pattern against the explicit double sum.
    Outcome pattern()
    {
        Rng rng(seed_for(2, Stream::Feeds));
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial)
        {
            const int N = 1 + static_cast<int>(rng.uniform() * 64);
            const int S = 1 + static_cast<int>(rng.uniform() * 8);
            const CMatrix E = gaussian(rng, N, S);
            const CVector a = gaussian(rng, N);
            double ref = 0.0;
            for (int s = 0; s < S; ++s)
                for (int n = 0; n < N; ++n)
                    for (int m = 0; m < N; ++m)
                        ref += (std::conj(a(n)) * E(n, s) * a(m) * std::conj(E(m, s))).real();
            worst = std::max(worst, std::abs(beam_pattern(E, a) - ref) / std::max(1.0, ref));
        }
        return {worst <= 1e-10, fmt("max relative deviation %.2e over 100 instances", worst)};
    }

    // 3. Projections: idempotent, feasible, Lorentzian matches a grid search.
    Outcome projections()
    {
        Rng rng(seed_for(3, Stream::Feeds));
        const std::vector<ConstraintFamily> families{ConstraintFamily::unit_modulus(), ConstraintFamily::lorentzian(),
                                                     ConstraintFamily::amplitude_range(0.2, 0.9),
                                                     ConstraintFamily::amplitude_set({0.0, 0.25, 0.5, 1.0})};
        bool idempotent = true;
        double violation = 0.0;
        for (const auto &f : families)
            for (int t = 0; t < 10000; ++t)
            {
                const cplx p = f.project(rng.complex_normal(4.0));
                idempotent &= f.project(p) == p;
                violation = std::max(violation, f.violation(p));
            }

        // Two-level grid over psi: 10^4 coarse points, 10^3 around the best one.
        double gap = -INFINITY;
        for (int t = 0; t < 1000; ++t)
        {
            const cplx w = rng.complex_normal(4.0);
            auto dist = [&](double psi) { return std::abs(w - lorentzian_point(psi)); };
            const int coarse = 10000, fine = 1000;
            const double h = kTwoPi / coarse;
            double best = INFINITY, best_psi = 0.0;
            for (int i = 0; i < coarse; ++i)
                if (const double d = dist(i * h); d < best)
                    best = d, best_psi = i * h;
            for (int i = -fine; i <= fine; ++i)
                best = std::min(best, dist(best_psi + i * h / fine));
            gap = std::max(gap, std::abs(w - project_lorentzian(w)) - best);
        }
        return {idempotent && violation <= 1e-12 && gap < 1e-6,
                fmt("idempotent=%s, max violation %.1e, max Lorentzian gap to grid %.1e", idempotent ? "yes" : "no",
                    violation, gap)};
    }

    // 4. Analytic gradients against central differences.
    Outcome gradients()
    {
        const ScenarioConfig cfg = load_scenario(kRoot + "/scenarios/sim_fig3_trend.json");
        const Scenario sc = build_scenario(cfg, 1);
        Rng rng(seed_for(4, Stream::Optimizer));
        double worst = 0.0;
        for (auto kind : {ObjectiveKind::SumRate, ObjectiveKind::BeamPatternGain, ObjectiveKind::WeightedISAC})
        {
            OptimizerConfig oc;
            oc.objective = kind;
            oc.omega = 0.5;
            oc.rate_ref = 5.0;
            oc.power_ref = 10.0;
            for (int t = 0; t < 10; ++t)
            {
                const ReconfigState st = random_state(sc.spec, rng);
                const auto f = [&](const RVector &theta, RVector *g)
                { return evaluate_objective(sc, oc, state_from_parameters(st, theta), g); };
                worst = std::max(worst, check_gradient(f, state_parameters(st), 1e-6).max_relative_error);
            }
        }
        return {worst < 1e-4, fmt("max relative error %.2e over 30 points", worst)};
    }

    // 5. Three-element gain against the 64-level exhaustive grid.
    Outcome exhaustive()
    {
        double worst = INFINITY;
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
        {
            Rng rng(seed_for(seed, Stream::Channel));
            ArchitectureOptions opt;
            opt.kind = ArchKind::Custom;
            opt.elements_per_layer = {3};
            Scenario sc;
            sc.spec = make_architecture(opt);
            sc.feeds = {{0, gaussian(rng, 3, 1), FeedTopology::DenseDiffraction}};
            sc.baseband = BasebandProcessor::equal_power(1, 1, 1.0);
            sc.channels.H = gaussian(rng, 1, 3);
            sc.channels.noise_power = 1.0;
            const CVector a = gaussian(rng, 3);
            sc.channels.target_steering = {a};

            cplx w[3][64];
            for (int n = 0; n < 3; ++n)
                for (int i = 0; i < 64; ++i)
                    w[n][i] = std::conj(a(n)) * sc.feeds[0].T(n, 0) * std::polar(1.0, kTwoPi * i / 64);
            double best = 0.0;
            for (int i = 0; i < 64; ++i)
                for (int j = 0; j < 64; ++j)
                    for (int k = 0; k < 64; ++k)
                        best = std::max(best, std::norm(w[0][i] + w[1][j] + w[2][k]));

            OptimizerConfig oc;
            oc.objective = ObjectiveKind::BeamPatternGain;
            oc.seed = seed;
            worst = std::min(worst, optimize(sc, oc).final_objective() / best);
        }
        return {worst >= 0.999, fmt("min optimized/grid ratio %.6f over 20 seeds", worst)};
    }

    // 6. Channel estimation.
    Outcome estimation()
    {
        ArchitectureOptions opt;
        opt.kind = ArchKind::SIM;
        opt.elements_per_layer = {32};
        opt.num_rf_chains = 4;
        opt.num_streams = 4;
        const ArchitectureSpec spec = make_architecture(opt);
        const auto feeds = build_feeds(spec);
        const int N = 32;

        double noiseless = 0.0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed)
        {
            Rng rng(seed_for(seed, Stream::Channel));
            const CVector h = gaussian(rng, N);
            PilotProtocol p;
            p.slots = design_configs(spec, 10, seed);
            const StackedSystem sys = run_protocol(spec, feeds, p, h);
            noiseless = std::max(noiseless, *solve_ls(sys.y, sys.Phi, 0.0, h).nmse);
        }

        // Orthonormalized observations at 20 dB: N sigma^2 / |h|^2.
        double mc = 0.0, closed = 0.0;
        const int runs = 1000;
        for (int r = 0; r < runs; ++r)
        {
            const auto seed = static_cast<std::uint64_t>(r);
            Rng rng(seed_for(seed, Stream::Estimation));
            const CVector h = gaussian(rng, N);
            const double sigma2 = noise_for_snr(h, 20.0);
            PilotProtocol p;
            p.slots = design_configs(spec, 10, seed);
            const CMatrix Q = orthonormalize_columns(run_protocol(spec, feeds, p, h).Phi);
            const CVector y = Q * h + rng.complex_normal(Q.rows(), 1, sigma2).col(0);
            mc += *solve_ls(y, Q, 0.0, h).nmse / runs;
            closed += N * sigma2 / h.squaredNorm() / runs;
        }
        const double mc_gap = std::abs(mc - closed) / closed;

        std::vector<double> by_T;
        std::string series;
        for (int T : {8, 10, 16, 32})
        {
            double acc = 0.0;
            const int seeds = 50;
            for (int s = 0; s < seeds; ++s)
            {
                const auto seed = static_cast<std::uint64_t>(1000 + s);
                Rng rng(seed_for(seed, Stream::Channel));
                const CVector h = gaussian(rng, N);
                PilotProtocol p;
                p.slots = design_configs(spec, T, seed);
                p.noise_power = noise_for_snr(h, 20.0);
                p.seed = seed;
                const StackedSystem sys = run_protocol(spec, feeds, p, h);
                try
                {
                    acc += *solve_ls(sys.y, sys.Phi, 0.0, h).nmse / seeds;
                }
                catch (const Error &)
                {
                    acc = INFINITY;
                }
            }
            by_T.push_back(acc);
            series += fmt(" T=%d:%.3g", T, acc);
        }
        bool decreasing = true;
        for (std::size_t i = 1; i < by_T.size(); ++i)
            decreasing &= by_T[i] < by_T[i - 1];

        return {noiseless < 1e-18 && mc_gap <= 0.1 && decreasing,
                fmt("noiseless max NMSE %.1e; orthonormal MC %.4g vs closed form %.4g (%.1f%%); mean NMSE%s",
                    noiseless, mc, closed, 100.0 * mc_gap, series.c_str())};
    }

    // 7. Harmonic decomposition.
    Outcome harmonics()
    {
        Rng rng(seed_for(7, Stream::Waveform));
        double parseval = 0.0, shift = 0.0;
        for (int t = 0; t < 1000; ++t)
        {
            const int P = 1 + t % 16, N = 1 + t % 5;
            TimeModulationPattern pat;
            pat.sequences.resize(N, P);
            for (int n = 0; n < N; ++n)
                for (int p = 0; p < P; ++p)
                    pat.sequences(n, p) = std::polar(1.0, rng.phase());
            const HarmonicDecomposition h = harmonic_coefficients(pat);
            for (int n = 0; n < N; ++n)
                parseval = std::max(parseval, std::abs(h.coefficients.row(n).squaredNorm() -
                                                       pat.sequences.row(n).squaredNorm() / P));

            const int s = t % P;
            TimeModulationPattern moved = pat;
            for (int p = 0; p < P; ++p)
                moved.sequences.col((p + s) % P) = pat.sequences.col(p);
            const HarmonicDecomposition hs = harmonic_coefficients(moved);
            for (int k = 0; k < P; ++k)
                shift = std::max(shift, (hs.coefficients.col(k) -
                                         std::polar(1.0, -kTwoPi * k * s / P) * h.coefficients.col(k))
                                            .cwiseAbs()
                                            .maxCoeff());
        }

        TimeModulationPattern alt;
        alt.sequences.resize(1, 2);
        alt.sequences << 1.0, -1.0;
        const HarmonicDecomposition a = harmonic_coefficients(alt);
        const bool exact = a.coefficients(0, 0) == cplx{0.0, 0.0} && a.coefficients(0, 1) == cplx{1.0, 0.0};

        return {parseval <= 1e-12 && exact && shift <= 1e-14,
                fmt("Parseval max gap %.1e; [1,-1] -> c0=0, c1=1 %s; shift max deviation %.1e", parseval,
                    exact ? "exactly" : "NOT exactly", shift)};
    }

    // 8. Near-field steering converges to the planar model.
    Outcome farfield()
    {
        const double lambda = 0.01;
        const auto pos = linear_layout(128, 0.25 * lambda, 0.0);
        const GeometryContext g{pos, lambda};
        bool monotone = true;
        double at_ten = 0.0;
        for (double u : {0.0, 0.4, 1.0})
        {
            const Direction dir{u, 0.0};
            const CVector far = farfield_steering(pos, dir, lambda);
            const CVector ref = far * std::conj(far(0));
            double prev = INFINITY;
            for (double m : {1.0, 2.0, 5.0, 10.0})
            {
                const double e =
                    max_phase_error(nearfield_steering(pos, m * g.rayleigh_distance() * dir.unit(), lambda), ref);
                monotone &= e < prev;
                prev = e;
            }
            at_ten = std::max(at_ten, prev);
        }
        return {monotone && at_ten < 0.05,
                fmt("max phase error at 10x Rayleigh %.4f rad, monotone=%s", at_ten, monotone ? "yes" : "no")};
    }

    // 9. CLI reruns produce identical bytes.
    Outcome determinism()
    {
        const fs::path tmp = fs::temp_directory_path() / ("imisac_acceptance_" + std::to_string(::getpid()));
        const std::vector<std::pair<std::string, std::string>> jobs{
            {"simulate", "identity_siso"}, {"optimize", "ris_beam"},  {"optimize", "dma_isac"},
            {"optimize", "rhs_beam"},      {"waveform", "ris_waveform"}, {"estimate", "sim_estimate"},
            {"sweep", "sim_layers_fixed_total"}, {"pareto", "dma_isac"}};
        int same = 0;
        std::string diff;
        for (const auto &[cmd, name] : jobs)
        {
            std::vector<std::string> files;
            bool ok = true;
            for (const char *run : {"a", "b"})
            {
                const fs::path out = tmp / (name + "." + cmd) / run;
                const std::string line = std::string(IMISAC_CLI) + " " + cmd + " -c " + kRoot + "/scenarios/" + name +
                                         ".json -o " + out.string() + " > /dev/null 2>&1";
                ok &= std::system(line.c_str()) == 0;
                files.push_back(read_file(out / "result.json"));
            }
            if (ok && !files[0].empty() && files[0] == files[1])
                ++same;
            else
                diff += " " + cmd + ":" + name;
        }
        fs::remove_all(tmp);
        const int total = static_cast<int>(jobs.size());
        return {same == total, fmt("%d/%d commands byte-identical%s", same, total, diff.c_str())};
    }
}

int main()
{
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
        {"SIM layer/element trend and ISAC trade-off", trend},
        {"beam pattern matches the double-sum oracle", pattern},
        {"projections idempotent, feasible, grid-optimal", projections},
        {"analytic gradients match central differences", gradients},
        {"N=3 gain reaches the exhaustive 64-level grid", exhaustive},
        {"channel estimation NMSE", estimation},
        {"harmonic decomposition identities", harmonics},
        {"near-field phase error beyond the Rayleigh distance", farfield},
        {"CLI reruns are byte-identical", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = criteria[i].second();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s [%zu] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

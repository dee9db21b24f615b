// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#include "imisac/runner.hpp"

#include "imisac/hash.hpp"
#include "imisac/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace imisac
{
    using json = nlohmann::json;
    using ojson = nlohmann::ordered_json;

    namespace
    {
        constexpr double kDeg = kPi / 180.0;

        // ------------------------------------------------------------------
        // Parsing context

        struct Ctx
        {
            std::vector<Violation> errors;
            bool strict = true;
            std::vector<std::string> *warnings = nullptr;

            void error(const std::string &path, const std::string &msg) { errors.push_back({path, msg}); }

            static std::string join(const std::string &path, std::string_view key)
            {
                return path.empty() ? std::string(key) : path + "." + std::string(key);
            }

            bool object(const json &j, const std::string &path)
            {
                if (j.is_object())
                    return true;
                error(path, "expected an object");
                return false;
            }

            void known(const json &o, const std::string &path, std::initializer_list<std::string_view> keys)
            {
                for (auto it = o.begin(); it != o.end(); ++it)
                {
                    if (std::find(keys.begin(), keys.end(), it.key()) != keys.end())
                        continue;
                    const std::string p = join(path, it.key());
                    if (strict)
                        error(p, "unknown field");
                    else if (warnings)
                        warnings->push_back(p + ": unknown field ignored");
                }
            }

            const json *find(const json &o, std::string_view key, const std::string &path, bool required)
            {
                auto it = o.find(key);
                if (it == o.end())
                {
                    if (required)
                        error(join(path, key), "missing required field");
                    return nullptr;
                }
                return &*it;
            }

            void number(const json &o, std::string_view key, const std::string &path, double &out,
                        bool required = false)
            {
                if (const json *v = find(o, key, path, required))
                {
                    if (v->is_number())
                        out = v->get<double>();
                    else
                        error(join(path, key), "expected a number");
                }
            }

            void number(const json &o, std::string_view key, const std::string &path, std::optional<double> &out)
            {
                if (const json *v = find(o, key, path, false))
                {
                    if (v->is_null())
                        out.reset();
                    else if (v->is_number())
                        out = v->get<double>();
                    else
                        error(join(path, key), "expected a number or null");
                }
            }

            void integer(const json &o, std::string_view key, const std::string &path, int &out,
                         bool required = false)
            {
                if (const json *v = find(o, key, path, required))
                {
                    if (v->is_number_integer())
                        out = v->get<int>();
                    else
                        error(join(path, key), "expected an integer");
                }
            }

            void boolean(const json &o, std::string_view key, const std::string &path, bool &out)
            {
                if (const json *v = find(o, key, path, false))
                {
                    if (v->is_boolean())
                        out = v->get<bool>();
                    else
                        error(join(path, key), "expected true or false");
                }
            }

            void string(const json &o, std::string_view key, const std::string &path, std::string &out,
                        bool required = false)
            {
                if (const json *v = find(o, key, path, required))
                {
                    if (v->is_string())
                        out = v->get<std::string>();
                    else
                        error(join(path, key), "expected a string");
                }
            }

            template <class T>
            void list(const json &o, std::string_view key, const std::string &path, std::vector<T> &out,
                      bool required = false)
            {
                const json *v = find(o, key, path, required);
                if (!v)
                    return;
                const std::string p = join(path, key);
                if (!v->is_array())
                {
                    error(p, "expected an array");
                    return;
                }
                out.clear();
                for (std::size_t i = 0; i < v->size(); ++i)
                {
                    const json &e = (*v)[i];
                    const bool ok = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
                    if (!ok || (std::is_unsigned_v<T> && e.is_number_integer() && !e.is_number_unsigned() &&
                                e.get<std::int64_t>() < 0))
                    {
                        error(p + "[" + std::to_string(i) + "]",
                              std::is_integral_v<T> ? "expected a nonnegative integer" : "expected a number");
                        continue;
                    }
                    out.push_back(e.get<T>());
                }
            }

            template <class E, class Parse>
            void enumeration(const json &o, std::string_view key, const std::string &path, E &out, Parse parse,
                             bool required = false)
            {
                std::string s;
                if (!find(o, key, path, required))
                    return;
                const std::size_t before = errors.size();
                string(o, key, path, s);
                if (errors.size() != before)
                    return;
                if (auto v = parse(s))
                    out = *v;
                else
                    error(join(path, key), "unrecognized value \"" + s + "\"");
            }
        };

        std::optional<ConstraintFamily::Kind> parse_constraint_kind(std::string_view s)
        {
            using K = ConstraintFamily::Kind;
            for (auto k : {K::UnitModulus, K::AmplitudeRange, K::AmplitudeSet, K::Lorentzian})
                if (to_string(k) == s)
                    return k;
            return std::nullopt;
        }

        ConstraintFamily parse_constraint(Ctx &c, const json &j, const std::string &path)
        {
            ConstraintFamily f;
            if (!c.object(j, path))
                return f;
            c.known(j, path, {"kind", "lo", "hi", "levels"});
            c.enumeration(j, "kind", path, f.kind, parse_constraint_kind, true);
            c.number(j, "lo", path, f.lo);
            c.number(j, "hi", path, f.hi);
            c.list(j, "levels", path, f.levels);
            if (f.kind == ConstraintFamily::Kind::AmplitudeSet)
            {
                if (f.levels.empty())
                    c.error(Ctx::join(path, "levels"), "amplitude set needs at least one level");
                std::sort(f.levels.begin(), f.levels.end());
            }
            return f;
        }

        ArchitectureConfig parse_architecture(Ctx &c, const json &j, const std::string &path)
        {
            ArchitectureConfig a;
            if (!c.object(j, path))
                return a;
            c.known(j, path,
                    {"kind", "elements_per_layer", "rf_chains", "streams", "carrier_frequency", "element_spacing_wl",
                     "layer_spacing_wl", "constraint", "feeding", "power_normalization", "power_budget",
                     "carrier_attenuation", "waveguide"});
            c.enumeration(j, "kind", path, a.kind, parse_arch_kind, true);
            c.list(j, "elements_per_layer", path, a.elements_per_layer, true);
            c.integer(j, "rf_chains", path, a.rf_chains);
            a.streams = a.rf_chains;
            c.integer(j, "streams", path, a.streams);
            c.number(j, "carrier_frequency", path, a.carrier_frequency, true);
            c.number(j, "element_spacing_wl", path, a.element_spacing_wl);
            c.number(j, "layer_spacing_wl", path, a.layer_spacing_wl);
            if (auto it = j.find("constraint"); it != j.end())
                a.constraint = parse_constraint(c, *it, Ctx::join(path, "constraint"));
            if (auto it = j.find("feeding"); it != j.end())
            {
                const std::string p = Ctx::join(path, "feeding");
                if (!it->is_array())
                    c.error(p, "expected an array of feed topologies");
                else
                    for (std::size_t i = 0; i < it->size(); ++i)
                    {
                        const json &e = (*it)[i];
                        auto t = e.is_string() ? parse_feed_topology(e.get<std::string>()) : std::nullopt;
                        if (t)
                            a.feeding.push_back(*t);
                        else
                            c.error(p + "[" + std::to_string(i) + "]", "unrecognized feed topology");
                    }
            }
            c.enumeration(j, "power_normalization", path, a.normalization, parse_power_normalization);
            c.number(j, "power_budget", path, a.power_budget);
            c.number(j, "carrier_attenuation", path, a.carrier_attenuation);
            if (auto it = j.find("waveguide"); it != j.end())
            {
                const std::string p = Ctx::join(path, "waveguide");
                if (c.object(*it, p))
                {
                    c.known(*it, p, {"alpha", "relative_permittivity", "beta", "element_area"});
                    c.number(*it, "alpha", p, a.feed.alpha);
                    c.number(*it, "relative_permittivity", p, a.feed.relative_permittivity);
                    c.number(*it, "beta", p, a.feed.beta);
                    c.number(*it, "element_area", p, a.feed.element_area);
                }
            }

            if (a.elements_per_layer.empty())
                c.error(Ctx::join(path, "elements_per_layer"), "at least one layer is required");
            for (std::size_t i = 0; i < a.elements_per_layer.size(); ++i)
                if (a.elements_per_layer[i] < 1)
                    c.error(Ctx::join(path, "elements_per_layer") + "[" + std::to_string(i) + "]", "must be positive");
            if (a.rf_chains < 1)
                c.error(Ctx::join(path, "rf_chains"), "must be positive");
            if (a.streams < 1)
                c.error(Ctx::join(path, "streams"), "must be positive");
            if (!(a.carrier_frequency > 0.0))
                c.error(Ctx::join(path, "carrier_frequency"), "must be positive");
            if (!(a.element_spacing_wl > 0.0))
                c.error(Ctx::join(path, "element_spacing_wl"), "must be positive");
            if (!(a.power_budget > 0.0))
                c.error(Ctx::join(path, "power_budget"), "must be positive");
            if (!a.feeding.empty() && a.feeding.size() != a.elements_per_layer.size())
                c.error(Ctx::join(path, "feeding"), "one topology per layer is required");
            return a;
        }

        Placement parse_placement(Ctx &c, const json &j, const std::string &path)
        {
            Placement pl;
            auto point = [&](const json &e, const std::string &p)
            {
                Placement::Point pt;
                if (!c.object(e, p))
                    return pt;
                c.known(e, p, {"azimuth_deg", "elevation_deg", "distance_m"});
                c.number(e, "azimuth_deg", p, pt.azimuth_deg, true);
                c.number(e, "elevation_deg", p, pt.elevation_deg);
                c.number(e, "distance_m", p, pt.distance_m);
                if (!(pt.distance_m > 0.0))
                    c.error(Ctx::join(p, "distance_m"), "must be positive");
                return pt;
            };
            if (j.is_array())
            {
                for (std::size_t i = 0; i < j.size(); ++i)
                    pl.points.push_back(point(j[i], path + "[" + std::to_string(i) + "]"));
                if (pl.points.empty())
                    c.error(path, "needs at least one point");
                return pl;
            }
            if (!c.object(j, path))
                return pl;
            c.known(j, path, {"count", "azimuth_deg", "distance_m"});
            c.integer(j, "count", path, pl.count, true);
            std::vector<double> az{pl.azimuth_lo_deg, pl.azimuth_hi_deg};
            std::vector<double> d{pl.distance_lo_m, pl.distance_hi_m};
            c.list(j, "azimuth_deg", path, az);
            c.list(j, "distance_m", path, d);
            if (az.size() != 2 || az[0] > az[1])
                c.error(Ctx::join(path, "azimuth_deg"), "expected an ascending [lo, hi] pair");
            else
                std::tie(pl.azimuth_lo_deg, pl.azimuth_hi_deg) = std::pair{az[0], az[1]};
            if (d.size() != 2 || !(d[0] > 0.0) || d[0] > d[1])
                c.error(Ctx::join(path, "distance_m"), "expected an ascending positive [lo, hi] pair");
            else
                std::tie(pl.distance_lo_m, pl.distance_hi_m) = std::pair{d[0], d[1]};
            if (pl.count < 1)
                c.error(Ctx::join(path, "count"), "must be positive");
            return pl;
        }

        std::optional<CMatrix> parse_matrix(Ctx &c, const json &j, const std::string &path)
        {
            if (!j.is_array() || j.empty() || !j[0].is_array())
            {
                c.error(path, "expected a nonempty array of rows of [re, im] pairs");
                return std::nullopt;
            }
            const auto rows = static_cast<Eigen::Index>(j.size());
            const auto cols = static_cast<Eigen::Index>(j[0].size());
            CMatrix m(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
            {
                const json &row = j[static_cast<std::size_t>(r)];
                if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
                {
                    c.error(path + "[" + std::to_string(r) + "]", "rows must have equal length");
                    return std::nullopt;
                }
                for (Eigen::Index k = 0; k < cols; ++k)
                {
                    const json &e = row[static_cast<std::size_t>(k)];
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                    {
                        c.error(path + "[" + std::to_string(r) + "][" + std::to_string(k) + "]",
                                "expected a [re, im] pair");
                        return std::nullopt;
                    }
                    m(r, k) = {e[0].get<double>(), e[1].get<double>()};
                }
            }
            return m;
        }

        ChannelConfig parse_channel(Ctx &c, const json &j, const std::string &path)
        {
            ChannelConfig ch;
            ch.users.count = 1;
            if (!c.object(j, path))
                return ch;
            c.known(j, path,
                    {"model", "k_factor", "users", "targets", "H", "noise_power", "snr_db", "snr_reference_m",
                     "pattern", "mask_halfwidth_deg"});
            c.enumeration(j, "model", path, ch.model.kind, parse_channel_kind);
            c.number(j, "k_factor", path, ch.model.k_factor);
            if (auto it = j.find("users"); it != j.end())
                ch.users = parse_placement(c, *it, Ctx::join(path, "users"));
            if (auto it = j.find("targets"); it != j.end())
                ch.targets = parse_placement(c, *it, Ctx::join(path, "targets"));
            if (auto it = j.find("H"); it != j.end())
                ch.H = parse_matrix(c, *it, Ctx::join(path, "H"));
            c.number(j, "noise_power", path, ch.noise_power);
            c.number(j, "snr_db", path, ch.snr_db);
            c.number(j, "snr_reference_m", path, ch.snr_reference_m);
            c.number(j, "mask_halfwidth_deg", path, ch.mask_halfwidth_deg);
            if (auto it = j.find("pattern"); it != j.end())
            {
                const std::string p = Ctx::join(path, "pattern");
                if (c.object(*it, p))
                {
                    c.known(*it, p, {"azimuth_deg", "points"});
                    std::vector<double> az{ch.pattern_lo_deg, ch.pattern_hi_deg};
                    c.list(*it, "azimuth_deg", p, az);
                    c.integer(*it, "points", p, ch.pattern_points);
                    if (az.size() != 2 || az[0] > az[1])
                        c.error(Ctx::join(p, "azimuth_deg"), "expected an ascending [lo, hi] pair");
                    else
                        std::tie(ch.pattern_lo_deg, ch.pattern_hi_deg) = std::pair{az[0], az[1]};
                    if (ch.pattern_points < 1)
                        c.error(Ctx::join(p, "points"), "must be positive");
                }
            }
            if (!(ch.model.k_factor >= 0.0))
                c.error(Ctx::join(path, "k_factor"), "must be nonnegative");
            if (ch.noise_power && !(*ch.noise_power > 0.0))
                c.error(Ctx::join(path, "noise_power"), "must be positive");
            if (!(ch.snr_reference_m > 0.0))
                c.error(Ctx::join(path, "snr_reference_m"), "must be positive");
            return ch;
        }

        OptimizerConfig parse_optimizer(Ctx &c, const json &j, const std::string &path)
        {
            OptimizerConfig o;
            if (!c.object(j, path))
                return o;
            c.known(j, path,
                    {"objective", "omega", "max_iters", "step", "tolerance", "starts", "outer_rounds", "rate_ref",
                     "power_ref"});
            c.enumeration(j, "objective", path, o.objective, parse_objective_kind);
            c.number(j, "omega", path, o.omega);
            c.integer(j, "max_iters", path, o.max_iters);
            c.number(j, "tolerance", path, o.tolerance);
            c.integer(j, "starts", path, o.starts);
            c.integer(j, "outer_rounds", path, o.outer_rounds);
            c.number(j, "rate_ref", path, o.rate_ref);
            c.number(j, "power_ref", path, o.power_ref);
            if (auto it = j.find("step"); it != j.end())
            {
                const std::string p = Ctx::join(path, "step");
                if (c.object(*it, p))
                {
                    c.known(*it, p, {"kind", "initial", "c", "tau"});
                    c.enumeration(*it, "kind", p, o.step.kind,
                                  [](std::string_view s) -> std::optional<StepRule::Kind>
                                  {
                                      if (s == "Fixed")
                                          return StepRule::Kind::Fixed;
                                      if (s == "Backtracking")
                                          return StepRule::Kind::Backtracking;
                                      return std::nullopt;
                                  });
                    c.number(*it, "initial", p, o.step.initial);
                    c.number(*it, "c", p, o.step.c);
                    c.number(*it, "tau", p, o.step.tau);
                    if (!(o.step.initial > 0.0))
                        c.error(Ctx::join(p, "initial"), "must be positive");
                    if (!(o.step.tau > 0.0 && o.step.tau < 1.0))
                        c.error(Ctx::join(p, "tau"), "must lie in (0, 1)");
                    if (!(o.step.c > 0.0 && o.step.c < 1.0))
                        c.error(Ctx::join(p, "c"), "must lie in (0, 1)");
                }
            }
            if (!(o.omega >= 0.0 && o.omega <= 1.0))
                c.error(Ctx::join(path, "omega"), "must lie in [0, 1]");
            if (o.max_iters < 1)
                c.error(Ctx::join(path, "max_iters"), "must be at least 1");
            if (!(o.tolerance > 0.0))
                c.error(Ctx::join(path, "tolerance"), "must be positive");
            if (o.starts < 1)
                c.error(Ctx::join(path, "starts"), "must be at least 1");
            if (o.outer_rounds < 1)
                c.error(Ctx::join(path, "outer_rounds"), "must be at least 1");
            if (!(o.rate_ref > 0.0))
                c.error(Ctx::join(path, "rate_ref"), "must be positive");
            if (!(o.power_ref > 0.0))
                c.error(Ctx::join(path, "power_ref"), "must be positive");
            return o;
        }

        StateConfig parse_state(Ctx &c, const json &j, const std::string &path)
        {
            StateConfig s;
            if (!c.object(j, path))
                return s;
            c.known(j, path, {"mode", "layers"});
            c.enumeration(j, "mode", path, s.mode,
                          [](std::string_view v) -> std::optional<StateConfig::Mode>
                          {
                              if (v == "initial")
                                  return StateConfig::Mode::Initial;
                              if (v == "random")
                                  return StateConfig::Mode::Random;
                              if (v == "explicit")
                                  return StateConfig::Mode::Explicit;
                              return std::nullopt;
                          });
            if (auto it = j.find("layers"); it != j.end())
            {
                const std::string p = Ctx::join(path, "layers");
                if (!it->is_array())
                    c.error(p, "expected an array of per-layer parameter arrays");
                else
                    for (std::size_t l = 0; l < it->size(); ++l)
                    {
                        json holder = json::object({{"v", (*it)[l]}});
                        std::vector<double> values;
                        c.list(holder, "v", p + "[" + std::to_string(l) + "]", values);
                        s.layers.push_back(std::move(values));
                    }
            }
            if (s.mode == StateConfig::Mode::Explicit && s.layers.empty())
                c.error(Ctx::join(path, "layers"), "explicit state needs per-layer parameters");
            return s;
        }

        EstimationConfig parse_estimation(Ctx &c, const json &j, const std::string &path)
        {
            EstimationConfig e;
            if (!c.object(j, path))
                return e;
            c.known(j, path, {"slots", "snr_db", "ridge", "trials", "orthonormalize"});
            c.list(j, "slots", path, e.slots);
            c.number(j, "snr_db", path, e.snr_db);
            c.number(j, "ridge", path, e.ridge);
            c.integer(j, "trials", path, e.trials);
            c.boolean(j, "orthonormalize", path, e.orthonormalize);
            if (e.slots.empty())
                c.error(Ctx::join(path, "slots"), "at least one slot count is required");
            for (std::size_t i = 0; i < e.slots.size(); ++i)
                if (e.slots[i] < 1)
                    c.error(Ctx::join(path, "slots") + "[" + std::to_string(i) + "]", "must be positive");
            if (!(e.ridge >= 0.0))
                c.error(Ctx::join(path, "ridge"), "must be nonnegative");
            if (e.trials < 1)
                c.error(Ctx::join(path, "trials"), "must be positive");
            return e;
        }

        WaveformConfig parse_waveform(Ctx &c, const json &j, const std::string &path)
        {
            WaveformConfig w;
            if (!c.object(j, path))
                return w;
            c.known(j, path,
                    {"slots", "period", "sense_azimuth_deg", "sense_elevation_deg", "comm_weight", "sense_weight",
                     "comm_magnitude", "comm_phases"});
            c.integer(j, "slots", path, w.slots);
            c.number(j, "period", path, w.period);
            c.number(j, "sense_azimuth_deg", path, w.sense_azimuth_deg);
            c.number(j, "sense_elevation_deg", path, w.sense_elevation_deg);
            c.number(j, "comm_weight", path, w.comm_weight);
            c.number(j, "sense_weight", path, w.sense_weight);
            c.number(j, "comm_magnitude", path, w.comm_magnitude);
            c.list(j, "comm_phases", path, w.comm_phases);
            if (w.slots < 2)
                c.error(Ctx::join(path, "slots"), "must be at least 2");
            if (!(w.period > 0.0))
                c.error(Ctx::join(path, "period"), "must be positive");
            if (!(w.comm_weight >= 0.0) || !(w.sense_weight >= 0.0) || w.comm_weight + w.sense_weight <= 0.0)
                c.error(Ctx::join(path, "comm_weight"), "weights must be nonnegative and not both zero");
            return w;
        }

        SweepConfig parse_sweep(Ctx &c, const json &j, const std::string &path)
        {
            SweepConfig s;
            if (!c.object(j, path))
                return s;
            c.known(j, path, {"elements_per_layer", "layers", "omega", "fixed_total_elements"});
            c.list(j, "elements_per_layer", path, s.elements_per_layer);
            c.list(j, "layers", path, s.layers);
            c.list(j, "omega", path, s.omega);
            if (auto it = j.find("fixed_total_elements"); it != j.end() && !it->is_null())
            {
                int v = 0;
                c.integer(j, "fixed_total_elements", path, v);
                s.fixed_total_elements = v;
                if (v < 1)
                    c.error(Ctx::join(path, "fixed_total_elements"), "must be positive");
            }
            for (std::size_t i = 0; i < s.elements_per_layer.size(); ++i)
                if (s.elements_per_layer[i] < 1)
                    c.error(Ctx::join(path, "elements_per_layer") + "[" + std::to_string(i) + "]", "must be positive");
            for (std::size_t i = 0; i < s.layers.size(); ++i)
                if (s.layers[i] < 1)
                    c.error(Ctx::join(path, "layers") + "[" + std::to_string(i) + "]", "must be positive");
            for (std::size_t i = 0; i < s.omega.size(); ++i)
                if (!(s.omega[i] >= 0.0 && s.omega[i] <= 1.0) || (i > 0 && s.omega[i] < s.omega[i - 1]))
                    c.error(Ctx::join(path, "omega") + "[" + std::to_string(i) + "]",
                            "weights must be ascending in [0, 1]");
            return s;
        }

        std::pair<int, int> line_column(std::string_view text, std::size_t byte)
        {
            int line = 1;
            int col = 1;
            for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
            {
                if (text[i] == '\n')
                {
                    ++line;
                    col = 1;
                }
                else
                    ++col;
            }
            return {line, col};
        }

        // ------------------------------------------------------------------
        // Serialization helpers

        ojson complex_json(cplx v) { return ojson::array({v.real(), v.imag()}); }

        ojson matrix_json(const CMatrix &m)
        {
            ojson rows = ojson::array();
            for (Eigen::Index r = 0; r < m.rows(); ++r)
            {
                ojson row = ojson::array();
                for (Eigen::Index k = 0; k < m.cols(); ++k)
                    row.push_back(complex_json(m(r, k)));
                rows.push_back(std::move(row));
            }
            return rows;
        }

        ojson vector_json(const CVector &v)
        {
            ojson a = ojson::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
                a.push_back(complex_json(v(i)));
            return a;
        }

        ojson optional_json(const std::optional<double> &v) { return v ? ojson(*v) : ojson(nullptr); }

        ojson placement_json(const Placement &p)
        {
            if (!p.random())
            {
                ojson a = ojson::array();
                for (const auto &pt : p.points)
                    a.push_back(ojson{{"azimuth_deg", pt.azimuth_deg},
                                      {"elevation_deg", pt.elevation_deg},
                                      {"distance_m", pt.distance_m}});
                return a;
            }
            return ojson{{"count", p.count},
                         {"azimuth_deg", {p.azimuth_lo_deg, p.azimuth_hi_deg}},
                         {"distance_m", {p.distance_lo_m, p.distance_hi_m}}};
        }

        ojson constraint_json(const ConstraintFamily &f)
        {
            ojson j{{"kind", to_string(f.kind)}};
            if (f.kind == ConstraintFamily::Kind::AmplitudeRange)
            {
                j["lo"] = f.lo;
                j["hi"] = f.hi;
            }
            if (f.kind == ConstraintFamily::Kind::AmplitudeSet)
                j["levels"] = f.levels;
            return j;
        }

        ojson scenario_json(const ScenarioConfig &cfg)
        {
            const auto &a = cfg.architecture;
            ojson arch{{"kind", to_string(a.kind)},
                       {"elements_per_layer", a.elements_per_layer},
                       {"rf_chains", a.rf_chains},
                       {"streams", a.streams},
                       {"carrier_frequency", a.carrier_frequency},
                       {"element_spacing_wl", a.element_spacing_wl},
                       {"layer_spacing_wl", a.layer_spacing_wl}};
            if (a.constraint)
                arch["constraint"] = constraint_json(*a.constraint);
            if (!a.feeding.empty())
            {
                ojson f = ojson::array();
                for (auto t : a.feeding)
                    f.push_back(to_string(t));
                arch["feeding"] = f;
            }
            arch["power_normalization"] = to_string(a.normalization);
            arch["power_budget"] = a.power_budget;
            arch["carrier_attenuation"] = a.carrier_attenuation;
            arch["waveguide"] = ojson{{"alpha", a.feed.alpha},
                                      {"relative_permittivity", a.feed.relative_permittivity},
                                      {"beta", optional_json(a.feed.beta)},
                                      {"element_area", optional_json(a.feed.element_area)}};

            const auto &c = cfg.channel;
            ojson ch{{"model", to_string(c.model.kind)}, {"k_factor", c.model.k_factor}};
            ch["users"] = placement_json(c.users);
            if (c.targets.size() > 0)
                ch["targets"] = placement_json(c.targets);
            if (c.H)
                ch["H"] = matrix_json(*c.H);
            ch["noise_power"] = optional_json(c.noise_power);
            ch["snr_db"] = c.snr_db;
            ch["snr_reference_m"] = c.snr_reference_m;
            ch["mask_halfwidth_deg"] = c.mask_halfwidth_deg;
            ch["pattern"] = ojson{{"azimuth_deg", {c.pattern_lo_deg, c.pattern_hi_deg}}, {"points", c.pattern_points}};

            const auto &o = cfg.optimizer;
            ojson opt{{"objective", to_string(o.objective)},
                      {"omega", o.omega},
                      {"max_iters", o.max_iters},
                      {"step",
                       {{"kind", o.step.kind == StepRule::Kind::Fixed ? "Fixed" : "Backtracking"},
                        {"initial", o.step.initial},
                        {"c", o.step.c},
                        {"tau", o.step.tau}}},
                      {"tolerance", o.tolerance},
                      {"starts", o.starts},
                      {"outer_rounds", o.outer_rounds},
                      {"rate_ref", o.rate_ref},
                      {"power_ref", o.power_ref}};

            static constexpr const char *modes[] = {"initial", "random", "explicit"};
            ojson st{{"mode", modes[static_cast<int>(cfg.state.mode)]}};
            if (!cfg.state.layers.empty())
                st["layers"] = cfg.state.layers;

            const auto &e = cfg.estimation;
            ojson est{{"slots", e.slots},
                      {"snr_db", optional_json(e.snr_db)},
                      {"ridge", e.ridge},
                      {"trials", e.trials},
                      {"orthonormalize", e.orthonormalize}};

            const auto &w = cfg.waveform;
            ojson wf{{"slots", w.slots},
                     {"period", w.period},
                     {"sense_azimuth_deg", w.sense_azimuth_deg},
                     {"sense_elevation_deg", w.sense_elevation_deg},
                     {"comm_weight", w.comm_weight},
                     {"sense_weight", w.sense_weight},
                     {"comm_magnitude", optional_json(w.comm_magnitude)},
                     {"comm_phases", w.comm_phases}};

            const auto &s = cfg.sweep;
            ojson sw{{"elements_per_layer", s.elements_per_layer},
                     {"layers", s.layers},
                     {"omega", s.omega},
                     {"fixed_total_elements",
                      s.fixed_total_elements ? ojson(*s.fixed_total_elements) : ojson(nullptr)}};

            return ojson{{"$schema_version", cfg.schema_version},
                         {"name", cfg.name},
                         {"architecture", arch},
                         {"channel", ch},
                         {"optimizer", opt},
                         {"state", st},
                         {"estimation", est},
                         {"waveform", wf},
                         {"sweep", sw},
                         {"seeds", cfg.seeds},
                         {"output_dir", cfg.output_dir}};
        }

        // ------------------------------------------------------------------
        // Execution helpers

        template <class F>
        auto parallel_map(std::size_t n, int threads, F &&fn)
        {
            using R = decltype(fn(std::size_t{0}));
            std::vector<std::optional<R>> slots(n);
            std::vector<std::exception_ptr> errors(n);
            std::atomic<std::size_t> next{0};
            auto worker = [&]
            {
                for (std::size_t i = next++; i < n; i = next++)
                {
                    try
                    {
                        slots[i] = fn(i);
                    }
                    catch (...)
                    {
                        errors[i] = std::current_exception();
                    }
                }
            };
            const auto count = static_cast<std::size_t>(std::clamp(threads, 1, 256));
            if (count == 1 || n <= 1)
                worker();
            else
            {
                std::vector<std::thread> pool;
                for (std::size_t t = 0; t < std::min(count, n); ++t)
                    pool.emplace_back(worker);
                for (auto &t : pool)
                    t.join();
            }
            // Report the first failing task in index order.
            for (auto &e : errors)
                if (e)
                    std::rethrow_exception(e);
            std::vector<R> out;
            out.reserve(n);
            for (auto &s : slots)
                out.push_back(std::move(*s));
            return out;
        }

        Vec3 aperture_center(const ArchitectureSpec &spec)
        {
            const auto &pos = spec.layers.back().positions;
            Vec3 c = Vec3::Zero();
            for (const auto &p : pos)
                c += p;
            return c / static_cast<double>(pos.size());
        }

        std::vector<Placement::Point> draw_points(const Placement &p, Rng &rng)
        {
            if (!p.random())
                return p.points;
            std::vector<Placement::Point> out;
            for (int i = 0; i < p.count; ++i)
            {
                Placement::Point pt;
                pt.azimuth_deg = rng.uniform(p.azimuth_lo_deg, p.azimuth_hi_deg);
                pt.distance_m = rng.uniform(p.distance_lo_m, p.distance_hi_m);
                out.push_back(pt);
            }
            return out;
        }

        Direction direction_of(const Placement::Point &p) { return {p.azimuth_deg * kDeg, p.elevation_deg * kDeg}; }

        double mean(std::span<const double> v)
        {
            return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        }

        double stddev(std::span<const double> v)
        {
            if (v.size() < 2)
                return 0.0;
            const double m = mean(v);
            double s = 0.0;
            for (double x : v)
                s += (x - m) * (x - m);
            return std::sqrt(s / static_cast<double>(v.size() - 1));
        }

        ReconfigState configured_state(const ScenarioConfig &cfg, const ArchitectureSpec &spec, std::uint64_t seed)
        {
            switch (cfg.state.mode)
            {
            case StateConfig::Mode::Random:
            {
                Rng rng(seed_for(seed, Stream::Initial));
                return random_state(spec, rng);
            }
            case StateConfig::Mode::Explicit:
            {
                if (static_cast<int>(cfg.state.layers.size()) != spec.num_layers())
                    fail(ErrorCode::DimensionMismatch, "explicit state needs one parameter list per layer");
                ReconfigState s = initial_state(spec);
                for (int l = 0; l < spec.num_layers(); ++l)
                {
                    std::vector<ParamPair> raw;
                    for (double v : cfg.state.layers[static_cast<std::size_t>(l)])
                        raw.push_back({v, v});
                    s = apply_parameters(s, l, raw);
                }
                return s;
            }
            default: return initial_state(spec);
            }
        }

        ojson pattern_json(std::span<const PatternSample> p)
        {
            ojson a = ojson::array();
            for (const auto &s : p)
                a.push_back(ojson{{"angle_deg", s.angle_deg}, {"power", s.power}});
            return a;
        }

        ojson result_header(Command cmd, const ScenarioConfig &cfg, const ArchitectureSpec &spec)
        {
            return ojson{{"$schema_version", kSchemaVersion},
                         {"command", to_string(cmd)},
                         {"library_version", library_version()},
                         {"config_hash", cfg.hash()},
                         {"spec_hash", spec.hash()},
                         {"name", cfg.name}};
        }

        std::string dump(const ojson &j) { return j.dump(2) + "\n"; }

        void add_pattern_records(std::vector<PlotRecord> &out, std::span<const PatternSample> p,
                                 const std::string &label)
        {
            for (const auto &s : p)
                out.push_back({PlotKind::Beampattern, label, {{"angle_deg", s.angle_deg}, {"power", s.power}}});
        }

        struct SeedMetrics
        {
            ScenarioResult result;
            ojson extra;
        };

        SeedMetrics evaluate_metrics(const ScenarioConfig &cfg, const Scenario &sc, const BasebandProcessor &V,
                                     const ReconfigState &state, std::uint64_t seed)
        {
            SeedMetrics m;
            const CMatrix E = build_effective_matrix(sc.spec, V, sc.feeds, state).E;
            const RateReport rr = sum_rate(sc.channels.H, E, sc.channels.noise_power, sc.stream_map());
            m.result.sum_rate = rr.sum_rate;
            m.result.per_user_sinr = rr.sinr;
            m.result.beampattern = pattern_cut(cfg, sc.spec, E);
            ojson iso = ojson::array();
            for (const auto &a : sc.channels.target_steering)
            {
                m.result.target_power.push_back(beam_pattern(E, a));
                iso.push_back(isotropic_power(E, a));
            }
            m.result.seed = seed;
            m.result.config_hash = cfg.hash();
            m.extra = ojson{{"isotropic_power", iso}, {"state_hash", state.hash()}, {"transmit_power", E.squaredNorm()}};
            return m;
        }

        ojson result_json(const ScenarioResult &r, const ojson &extra)
        {
            ojson j{{"seed", r.seed},
                    {"sum_rate", r.sum_rate},
                    {"per_user_sinr", r.per_user_sinr},
                    {"target_power", r.target_power}};
            for (auto it = extra.begin(); it != extra.end(); ++it)
                j[it.key()] = it.value();
            if (!r.objective_trace.empty())
                j["objective_trace"] = r.objective_trace;
            j["beampattern"] = pattern_json(r.beampattern);
            return j;
        }

        std::string trace_csv(std::span<const double> trace)
        {
            std::string s = "iter,objective\n";
            for (std::size_t i = 0; i < trace.size(); ++i)
                s += std::to_string(i) + "," + format_double(trace[i]) + "\n";
            return s;
        }

        OptimizerConfig seeded(const OptimizerConfig &o, std::uint64_t seed)
        {
            OptimizerConfig c = o;
            c.seed = seed_for(seed, Stream::Optimizer);
            return c;
        }

        // ------------------------------------------------------------------
        // Commands

        RunOutput run_simulate(Command cmd, const ScenarioConfig &cfg, const RunOptions &opt)
        {
            const bool optimizing = cmd == Command::Optimize;
            struct Item
            {
                SeedMetrics metrics;
                ojson info;
            };
            auto items = parallel_map(cfg.seeds.size(), opt.threads,
                                      [&](std::size_t i)
                                      {
                                          const std::uint64_t seed = cfg.seeds[i];
                                          const Scenario sc = build_scenario(cfg, seed);
                                          Item it;
                                          if (!optimizing)
                                          {
                                              it.metrics = evaluate_metrics(cfg, sc, sc.baseband,
                                                                            configured_state(cfg, sc.spec, seed), seed);
                                              return it;
                                          }
                                          const OptimizationTrace tr = optimize(sc, seeded(cfg.optimizer, seed));
                                          it.metrics = evaluate_metrics(cfg, sc, tr.baseband, tr.state, seed);
                                          it.metrics.result.objective_trace = tr.objective;
                                          it.info = ojson{{"status", to_string(tr.status)},
                                                          {"iterations", tr.iterations},
                                                          {"final_objective", tr.final_objective()}};
                                          return it;
                                      });

            const ArchitectureSpec spec = build_spec(cfg.architecture);
            RunOutput out;
            ojson root = result_header(cmd, cfg, spec);
            if (optimizing)
                root["objective"] = to_string(cfg.optimizer.objective);
            ojson results = ojson::array();
            std::vector<double> rates;
            std::vector<PlotRecord> pattern;
            for (const auto &it : items)
            {
                ojson extra = it.metrics.extra;
                for (auto e = it.info.begin(); e != it.info.end(); ++e)
                    extra[e.key()] = e.value();
                results.push_back(result_json(it.metrics.result, extra));
                rates.push_back(it.metrics.result.sum_rate);
                add_pattern_records(pattern, it.metrics.result.beampattern,
                                    "seed=" + std::to_string(it.metrics.result.seed));
                if (optimizing)
                    out.side_files["trace_seed" + std::to_string(it.metrics.result.seed) + ".csv"] =
                        trace_csv(it.metrics.result.objective_trace);
            }
            root["results"] = results;
            root["summary"] = ojson{{"sum_rate_mean", mean(rates)}, {"sum_rate_std", stddev(rates)},
                                    {"seeds", rates.size()}};
            out.result_json = dump(root);
            out.side_files["beampattern.csv"] = emit_plotdata(pattern, PlotKind::Beampattern);
            return out;
        }

        RunOutput run_estimate(const ScenarioConfig &cfg, const RunOptions &opt)
        {
            const auto &ec = cfg.estimation;
            const ArchitectureSpec spec = build_spec(cfg.architecture);
            const int N = spec.aperture_elements();
            const int K = spec.num_rf_chains;

            struct Cell
            {
                std::vector<double> nmse;
                std::vector<double> cond;
            };
            // One task per (slot count, seed).
            const std::size_t S = cfg.seeds.size();
            auto cells = parallel_map(ec.slots.size() * S, opt.threads,
                                      [&](std::size_t idx)
                                      {
                                          const int T = ec.slots[idx / S];
                                          const std::uint64_t seed = cfg.seeds[idx % S];
                                          const Scenario sc = build_scenario(cfg, seed);
                                          Cell cell;
                                          for (int trial = 0; trial < ec.trials; ++trial)
                                          {
                                              const std::uint64_t ts =
                                                  seed_for(seed, Stream::Estimation,
                                                           static_cast<std::uint64_t>(T) * 1000003ULL +
                                                               static_cast<std::uint64_t>(trial));
                                              PilotProtocol proto;
                                              proto.slots = design_configs(spec, T, ts);
                                              proto.seed = ts;
                                              for (int u = 0; u < sc.channels.num_users(); ++u)
                                              {
                                                  const CVector h = sc.channels.H.row(u).transpose();
                                                  const double sigma2 = ec.snr_db ? noise_for_snr(h, *ec.snr_db) : 0.0;
                                                  StackedSystem sys = run_protocol(spec, sc.feeds, proto, h);
                                                  if (ec.orthonormalize)
                                                      sys.Phi = orthonormalize_columns(sys.Phi);
                                                  sys.y = sys.Phi * h;
                                                  if (sigma2 > 0.0)
                                                  {
                                                      Rng rng(seed_for(ts, Stream::Estimation,
                                                                       static_cast<std::uint64_t>(u) + 1));
                                                      for (Eigen::Index r = 0; r < sys.y.size(); ++r)
                                                          sys.y(r) += rng.complex_normal(sigma2);
                                                  }
                                                  const EstimationReport rep = solve_ls(sys.y, sys.Phi, ec.ridge, h, T);
                                                  cell.nmse.push_back(*rep.nmse);
                                                  cell.cond.push_back(rep.condition_number);
                                              }
                                          }
                                          return cell;
                                      });

            ojson root = result_header(Command::Estimate, cfg, spec);
            ojson rows = ojson::array();
            std::vector<PlotRecord> plot;
            for (std::size_t t = 0; t < ec.slots.size(); ++t)
            {
                std::vector<double> nmse;
                std::vector<double> cond;
                for (std::size_t s = 0; s < S; ++s)
                {
                    const Cell &c = cells[t * S + s];
                    nmse.insert(nmse.end(), c.nmse.begin(), c.nmse.end());
                    cond.insert(cond.end(), c.cond.begin(), c.cond.end());
                }
                rows.push_back(ojson{{"slots", ec.slots[t]},
                                     {"K", K},
                                     {"N", N},
                                     {"nmse_mean", mean(nmse)},
                                     {"nmse_std", stddev(nmse)},
                                     {"condition_number_mean", mean(cond)},
                                     {"condition_number_max", *std::max_element(cond.begin(), cond.end())},
                                     {"samples", nmse.size()}});
                plot.push_back({PlotKind::NmseVsT,
                                "K=" + std::to_string(K),
                                {{"slots", ec.slots[t]}, {"nmse_mean", mean(nmse)}, {"seeds", static_cast<double>(S)}}});
            }
            root["snr_db"] = optional_json(ec.snr_db);
            root["ridge"] = ec.ridge;
            root["orthonormalize"] = ec.orthonormalize;
            root["results"] = rows;
            RunOutput out;
            out.result_json = dump(root);
            out.side_files["nmse_vs_T.csv"] = emit_plotdata(plot, PlotKind::NmseVsT);
            return out;
        }

        RunOutput run_waveform(const ScenarioConfig &cfg, const RunOptions &opt)
        {
            const auto &wc = cfg.waveform;
            struct Item
            {
                SplitDesign design;
                std::vector<PatternSample> k0;
                std::vector<PatternSample> k1;
                std::uint64_t seed;
            };
            auto items = parallel_map(
                cfg.seeds.size(), opt.threads,
                [&](std::size_t i)
                {
                    const std::uint64_t seed = cfg.seeds[i];
                    const Scenario sc = build_scenario(cfg, seed);
                    const ReconfigState base = configured_state(cfg, sc.spec, seed);
                    const auto N = static_cast<Eigen::Index>(sc.spec.aperture_elements());

                    std::vector<double> phases = wc.comm_phases;
                    if (phases.empty())
                    {
                        // Matched to user 0 through the fixed lower layers.
                        std::vector<FeedingMatrix> lower(sc.feeds.begin(), sc.feeds.end());
                        ReconfigState unit = base;
                        unit.layers.back().q.setOnes();
                        const CMatrix field = layer_product(lower, unit) * sc.baseband.V;
                        phases.resize(static_cast<std::size_t>(N));
                        for (Eigen::Index n = 0; n < N; ++n)
                            phases[static_cast<std::size_t>(n)] = -std::arg(sc.channels.H(0, n) * field(n, 0));
                    }
                    Item it;
                    it.seed = seed;
                    it.design = design_split_pattern(sc.spec, phases,
                                                     {wc.sense_azimuth_deg * kDeg, wc.sense_elevation_deg * kDeg},
                                                     wc.slots, seed_for(seed, Stream::Waveform),
                                                     {wc.comm_weight, wc.sense_weight}, wc.comm_magnitude);
                    it.design.pattern.period = wc.period;
                    const HarmonicDecomposition d = harmonic_coefficients(it.design.pattern);
                    const auto &pos = sc.spec.layers.back().positions;
                    const auto &ch = cfg.channel;
                    for (int p = 0; p < ch.pattern_points; ++p)
                    {
                        const double deg = ch.pattern_points == 1
                                               ? ch.pattern_lo_deg
                                               : ch.pattern_lo_deg + (ch.pattern_hi_deg - ch.pattern_lo_deg) * p /
                                                                         (ch.pattern_points - 1);
                        const CVector a = farfield_steering(pos, {deg * kDeg, 0.0}, sc.spec.wavelength());
                        it.k0.push_back({deg, harmonic_beam_pattern(sc.spec, sc.feeds, sc.baseband, base,
                                                                    it.design.pattern, d, 0, a)});
                        it.k1.push_back({deg, harmonic_beam_pattern(sc.spec, sc.feeds, sc.baseband, base,
                                                                    it.design.pattern, d, 1, a)});
                    }
                    return it;
                });

            const ArchitectureSpec spec = build_spec(cfg.architecture);
            ojson root = result_header(Command::Waveform, cfg, spec);
            ojson results = ojson::array();
            RunOutput out;
            std::vector<PlotRecord> plot;
            for (const auto &it : items)
            {
                const auto &d = it.design;
                ojson seq = ojson::array();
                for (Eigen::Index n = 0; n < d.pattern.sequences.rows(); ++n)
                    seq.push_back(vector_json(d.pattern.sequences.row(n).transpose()));
                results.push_back(ojson{{"seed", it.seed},
                                        {"slots", d.pattern.slots()},
                                        {"period", d.pattern.period},
                                        {"objective", d.objective},
                                        {"sense_gain", d.sense_gain},
                                        {"max_comm_phase_error", d.max_comm_phase_error},
                                        {"c0", vector_json(d.c0)},
                                        {"c1", vector_json(d.c1)},
                                        {"pattern", seq},
                                        {"beampattern_k0", pattern_json(it.k0)},
                                        {"beampattern_k1", pattern_json(it.k1)}});
                const std::string tag = "seed=" + std::to_string(it.seed);
                add_pattern_records(plot, it.k0, tag + " k=0");
                add_pattern_records(plot, it.k1, tag + " k=1");

                const HarmonicDecomposition h = harmonic_coefficients(d.pattern);
                std::string csv = "element,k,re,im\n";
                for (Eigen::Index n = 0; n < h.coefficients.rows(); ++n)
                    for (Eigen::Index k = 0; k < h.coefficients.cols(); ++k)
                        csv += std::to_string(n) + "," + std::to_string(k) + "," +
                               format_double(h.coefficients(n, k).real()) + "," +
                               format_double(h.coefficients(n, k).imag()) + "\n";
                out.side_files["harmonics_seed" + std::to_string(it.seed) + ".csv"] = csv;
            }
            root["results"] = results;
            out.result_json = dump(root);
            out.side_files["beampattern.csv"] = emit_plotdata(plot, PlotKind::Beampattern);
            return out;
        }

        RunOutput run_sweep(const ScenarioConfig &cfg, const RunOptions &opt)
        {
            const auto &sw = cfg.sweep;
            if (sw.layers.empty() && sw.elements_per_layer.empty())
                fail(ErrorCode::InvalidArgument, "sweep needs a layers or elements_per_layer axis");
            const int base_layers = static_cast<int>(cfg.architecture.elements_per_layer.size());
            const int base_elements = cfg.architecture.elements_per_layer.front();

            struct Point
            {
                int layers;
                int elements;
            };
            std::vector<Point> points;
            const std::vector<int> layer_axis = sw.layers.empty() ? std::vector<int>{base_layers} : sw.layers;
            for (int L : layer_axis)
            {
                if (sw.fixed_total_elements)
                {
                    if (*sw.fixed_total_elements % L != 0)
                        fail(ErrorCode::InvalidArgument, "fixed_total_elements must be divisible by every layer count");
                    points.push_back({L, *sw.fixed_total_elements / L});
                    continue;
                }
                const std::vector<int> el_axis =
                    sw.elements_per_layer.empty() ? std::vector<int>{base_elements} : sw.elements_per_layer;
                for (int N : el_axis)
                    points.push_back({L, N});
            }

            const std::size_t S = cfg.seeds.size();
            auto rates = parallel_map(points.size() * S, opt.threads,
                                      [&](std::size_t idx)
                                      {
                                          const Point &p = points[idx / S];
                                          const std::uint64_t seed = cfg.seeds[idx % S];
                                          ScenarioConfig c = cfg;
                                          c.architecture.elements_per_layer.assign(static_cast<std::size_t>(p.layers),
                                                                                   p.elements);
                                          if (!c.architecture.feeding.empty())
                                          {
                                              const FeedTopology first = c.architecture.feeding.front();
                                              c.architecture.feeding.assign(static_cast<std::size_t>(p.layers),
                                                                            FeedTopology::DenseDiffraction);
                                              c.architecture.feeding.front() = first;
                                          }
                                          const Scenario sc = build_scenario(c, seed);
                                          const OptimizationTrace tr = optimize(sc, seeded(c.optimizer, seed));
                                          const CMatrix E =
                                              build_effective_matrix(sc.spec, tr.baseband, sc.feeds, tr.state).E;
                                          return sum_rate(sc.channels.H, E, sc.channels.noise_power, sc.stream_map())
                                              .sum_rate;
                                      });

            const ArchitectureSpec spec = build_spec(cfg.architecture);
            ojson root = result_header(Command::Sweep, cfg, spec);
            ojson rows = ojson::array();
            std::vector<PlotRecord> plot;
            for (std::size_t i = 0; i < points.size(); ++i)
            {
                std::vector<double> r(rates.begin() + static_cast<std::ptrdiff_t>(i * S),
                                      rates.begin() + static_cast<std::ptrdiff_t>((i + 1) * S));
                const std::string label = "L=" + std::to_string(points[i].layers);
                rows.push_back(ojson{{"label", label},
                                     {"layers", points[i].layers},
                                     {"elements_per_layer", points[i].elements},
                                     {"sum_rate_mean", mean(r)},
                                     {"sum_rate_std", stddev(r)},
                                     {"seeds", cfg.seeds},
                                     {"sum_rate", r}});
                plot.push_back({PlotKind::SeVsElements,
                                label,
                                {{"layers", points[i].layers},
                                 {"elements_per_layer", points[i].elements},
                                 {"sum_rate_mean", mean(r)},
                                 {"sum_rate_std", stddev(r)},
                                 {"seeds", static_cast<double>(S)}}});
            }
            root["objective"] = to_string(cfg.optimizer.objective);
            root["results"] = rows;
            RunOutput out;
            out.result_json = dump(root);
            out.side_files["se_vs_elements.csv"] = emit_plotdata(plot, PlotKind::SeVsElements);
            return out;
        }

        RunOutput run_pareto(const ScenarioConfig &cfg, const RunOptions &opt)
        {
            const std::vector<double> grid =
                cfg.sweep.omega.empty() ? std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0} : cfg.sweep.omega;
            struct Item
            {
                ParetoResult res;
                std::vector<double> iso;
            };
            auto items = parallel_map(cfg.seeds.size(), opt.threads,
                                      [&](std::size_t i)
                                      {
                                          const std::uint64_t seed = cfg.seeds[i];
                                          const Scenario sc = build_scenario(cfg, seed);
                                          Item it;
                                          it.res = pareto_sweep(sc, grid, seeded(cfg.optimizer, seed));
                                          for (const auto &p : it.res.points)
                                          {
                                              const CMatrix E =
                                                  build_effective_matrix(sc.spec, p.baseband, sc.feeds, p.state).E;
                                              double iso = std::numeric_limits<double>::infinity();
                                              for (const auto &a : sc.channels.target_steering)
                                                  iso = std::min(iso, isotropic_power(E, a));
                                              it.iso.push_back(iso);
                                          }
                                          return it;
                                      });

            const ArchitectureSpec spec = build_spec(cfg.architecture);
            ojson root = result_header(Command::Pareto, cfg, spec);
            ojson results = ojson::array();
            std::vector<PlotRecord> plot;
            std::vector<std::vector<double>> rate_by_w(grid.size()), power_by_w(grid.size());
            for (std::size_t i = 0; i < items.size(); ++i)
            {
                const auto &r = items[i].res;
                ojson pts = ojson::array();
                const std::string label = "seed=" + std::to_string(cfg.seeds[i]);
                for (std::size_t k = 0; k < r.points.size(); ++k)
                {
                    const auto &p = r.points[k];
                    pts.push_back(ojson{{"omega", p.omega},
                                        {"sum_rate", p.rate},
                                        {"worst_target_power", p.worst_target_power},
                                        {"isotropic_power", items[i].iso[k]},
                                        {"objective", p.objective},
                                        {"state_hash", p.state.hash()}});
                    plot.push_back({PlotKind::Pareto,
                                    label,
                                    {{"omega", p.omega}, {"sum_rate", p.rate}, {"worst_target_power", p.worst_target_power}}});
                    rate_by_w[k].push_back(p.rate);
                    power_by_w[k].push_back(p.worst_target_power);
                }
                results.push_back(ojson{{"seed", cfg.seeds[i]},
                                        {"rate_ref", r.rate_ref},
                                        {"power_ref", r.power_ref},
                                        {"points", pts}});
            }
            for (std::size_t k = 0; k < grid.size(); ++k)
                plot.push_back({PlotKind::Pareto,
                                "mean",
                                {{"omega", grid[k]},
                                 {"sum_rate", mean(rate_by_w[k])},
                                 {"worst_target_power", mean(power_by_w[k])}}});
            root["objective"] = "WeightedISAC";
            root["results"] = results;
            RunOutput out;
            out.result_json = dump(root);
            out.side_files["pareto.csv"] = emit_plotdata(plot, PlotKind::Pareto);
            return out;
        }
    }

    // ---------------------------------------------------------------------

    std::string ScenarioConfig::hash() const
    {
        Hasher h;
        h.add(serialize_scenario(*this));
        return h.hex();
    }

    ScenarioConfig parse_scenario(std::string_view text, const LoadOptions &opt)
    {
        json j;
        try
        {
            j = json::parse(text.begin(), text.end());
        }
        catch (const json::parse_error &e)
        {
            const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
            throw ConfigError(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                                         std::to_string(col) + ": " + e.what(),
                              {{"$", "line " + std::to_string(line) + ", column " + std::to_string(col)}});
        }

        Ctx c;
        c.strict = opt.strict;
        c.warnings = opt.warnings;
        ScenarioConfig cfg;
        if (!c.object(j, "$"))
            throw ConfigError(ErrorCode::ValidationError, "scenario must be a JSON object", c.errors);

        c.known(j, "",
                {"$schema_version", "name", "architecture", "channel", "optimizer", "state", "estimation", "waveform",
                 "sweep", "seeds", "output_dir"});
        c.integer(j, "$schema_version", "", cfg.schema_version, true);
        if (j.contains("$schema_version") && cfg.schema_version != kSchemaVersion)
            c.error("$schema_version", "unsupported schema version " + std::to_string(cfg.schema_version));
        c.string(j, "name", "", cfg.name);
        if (const json *a = c.find(j, "architecture", "", true))
            cfg.architecture = parse_architecture(c, *a, "architecture");
        if (auto it = j.find("channel"); it != j.end())
            cfg.channel = parse_channel(c, *it, "channel");
        else
            cfg.channel.users.count = 1;
        if (auto it = j.find("optimizer"); it != j.end())
            cfg.optimizer = parse_optimizer(c, *it, "optimizer");
        if (auto it = j.find("state"); it != j.end())
            cfg.state = parse_state(c, *it, "state");
        if (auto it = j.find("estimation"); it != j.end())
            cfg.estimation = parse_estimation(c, *it, "estimation");
        if (auto it = j.find("waveform"); it != j.end())
            cfg.waveform = parse_waveform(c, *it, "waveform");
        if (auto it = j.find("sweep"); it != j.end())
            cfg.sweep = parse_sweep(c, *it, "sweep");
        c.list(j, "seeds", "", cfg.seeds);
        if (cfg.seeds.empty())
            c.error("seeds", "at least one seed is required");
        c.string(j, "output_dir", "", cfg.output_dir);

        // Cross-section checks need a structurally sound architecture.
        const bool arch_ok = std::none_of(c.errors.begin(), c.errors.end(), [](const Violation &v)
                                          { return v.path.rfind("architecture", 0) == 0; });
        if (arch_ok)
        {
            ArchitectureSpec spec;
            try
            {
                spec = make_architecture({cfg.architecture.kind, cfg.architecture.elements_per_layer,
                                          cfg.architecture.rf_chains, cfg.architecture.streams,
                                          cfg.architecture.carrier_frequency, cfg.architecture.element_spacing_wl,
                                          cfg.architecture.layer_spacing_wl, cfg.architecture.constraint,
                                          cfg.architecture.normalization, cfg.architecture.power_budget,
                                          cfg.architecture.carrier_attenuation});
                for (std::size_t l = 0; l < cfg.architecture.feeding.size(); ++l)
                    spec.layers[l].feeding = cfg.architecture.feeding[l];
                for (const auto &v : validate_architecture(spec).violations)
                    c.error("architecture." + v.path, v.message);
            }
            catch (const Error &e)
            {
                c.error("architecture", e.what());
            }
            const auto &ch = cfg.channel;
            if (ch.H)
            {
                if (ch.H->cols() != spec.aperture_elements())
                    c.error("channel.H", "column count differs from the aperture size");
                if (ch.H->rows() != cfg.architecture.streams)
                    c.error("channel.H", "one row per stream is required");
            }
            else if (ch.users.size() != cfg.architecture.streams)
                c.error("channel.users", "user count must equal the stream count");
            if (cfg.state.mode == StateConfig::Mode::Explicit)
            {
                if (cfg.state.layers.size() != cfg.architecture.elements_per_layer.size())
                    c.error("state.layers", "one parameter list per layer is required");
                else
                    for (std::size_t l = 0; l < cfg.state.layers.size(); ++l)
                        if (static_cast<int>(cfg.state.layers[l].size()) != cfg.architecture.elements_per_layer[l])
                            c.error("state.layers[" + std::to_string(l) + "]", "one parameter per element is required");
            }
            if (!cfg.waveform.comm_phases.empty() &&
                static_cast<int>(cfg.waveform.comm_phases.size()) != spec.aperture_elements())
                c.error("waveform.comm_phases", "one phase per aperture element is required");
        }

        if (!c.errors.empty())
        {
            ValidationReport r{c.errors};
            throw ConfigError(ErrorCode::ValidationError, r.summary(), c.errors);
        }
        return cfg;
    }

    ScenarioConfig load_scenario(const std::filesystem::path &path, const LoadOptions &opt)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError(ErrorCode::IoError, "cannot open " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_scenario(ss.str(), opt);
    }

    std::string serialize_scenario(const ScenarioConfig &cfg) { return scenario_json(cfg).dump(2) + "\n"; }

    ArchitectureSpec build_spec(const ArchitectureConfig &a)
    {
        ArchitectureOptions o;
        o.kind = a.kind;
        o.elements_per_layer = a.elements_per_layer;
        o.num_rf_chains = a.rf_chains;
        o.num_streams = a.streams;
        o.carrier_frequency = a.carrier_frequency;
        o.element_spacing_wl = a.element_spacing_wl;
        o.layer_spacing_wl = a.layer_spacing_wl;
        o.constraint = a.constraint;
        o.normalization = a.normalization;
        o.power_budget = a.power_budget;
        o.carrier_attenuation = a.carrier_attenuation;
        ArchitectureSpec spec = make_architecture(o);
        for (std::size_t l = 0; l < a.feeding.size() && l < spec.layers.size(); ++l)
            spec.layers[l].feeding = a.feeding[l];
        const ValidationReport r = validate_architecture(spec);
        if (!r.ok())
        {
            std::vector<Violation> v;
            for (const auto &x : r.violations)
                v.push_back({"architecture." + x.path, x.message});
            throw ConfigError(ErrorCode::ValidationError, ValidationReport{v}.summary(), v);
        }
        return spec;
    }

    Scenario build_scenario(const ScenarioConfig &cfg, std::uint64_t seed)
    {
        Scenario sc;
        sc.spec = build_spec(cfg.architecture);
        sc.feeds = build_feeds(sc.spec, cfg.architecture.feed);
        sc.baseband = BasebandProcessor::equal_power(sc.spec.num_rf_chains, sc.spec.num_streams, sc.spec.power_budget);

        const auto &ch = cfg.channel;
        const double lambda = sc.spec.wavelength();
        GeometryContext geo{sc.spec.layers.back().positions, lambda};
        const Vec3 center = aperture_center(sc.spec);

        Rng rng(seed_for(seed, Stream::Channel, 100));
        const auto users = draw_points(ch.users, rng);
        const auto targets = draw_points(ch.targets, rng);

        if (ch.H)
        {
            sc.channels.H = *ch.H;
            sc.channels.wavelength = lambda;
            sc.channels.noise_power = ch.noise_power.value_or(std::pow(10.0, -ch.snr_db / 10.0));
        }
        else
        {
            std::vector<Vec3> pos;
            for (const auto &u : users)
                pos.push_back(center + u.distance_m * direction_of(u).unit());
            sc.channels = generate_user_channels(geo, pos, ch.model, seed_for(seed, Stream::Channel));
            const double g = free_space_gain(lambda, ch.snr_reference_m);
            sc.channels.noise_power = ch.noise_power.value_or(g * g * std::pow(10.0, -ch.snr_db / 10.0));
        }
        for (const auto &t : targets)
            sc.channels.target_steering.push_back(farfield_steering(geo.positions, direction_of(t), lambda));

        if (cfg.optimizer.objective == ObjectiveKind::BeampatternMSE)
        {
            for (int p = 0; p < ch.pattern_points; ++p)
            {
                const double deg = ch.pattern_points == 1 ? ch.pattern_lo_deg
                                                          : ch.pattern_lo_deg + (ch.pattern_hi_deg - ch.pattern_lo_deg) *
                                                                                    p / (ch.pattern_points - 1);
                sc.mse_grid.push_back(farfield_steering(geo.positions, {deg * kDeg, 0.0}, lambda));
                bool lit = false;
                for (const auto &t : targets)
                    lit = lit || std::abs(deg - t.azimuth_deg) <= ch.mask_halfwidth_deg;
                sc.mse_mask.push_back(lit ? 1.0 : 0.0);
            }
        }
        return sc;
    }

    std::vector<PatternSample> pattern_cut(const ScenarioConfig &cfg, const ArchitectureSpec &spec, const CMatrix &E)
    {
        const auto &ch = cfg.channel;
        std::vector<PatternSample> out;
        const auto &pos = spec.layers.back().positions;
        for (int p = 0; p < ch.pattern_points; ++p)
        {
            const double deg = ch.pattern_points == 1
                                   ? ch.pattern_lo_deg
                                   : ch.pattern_lo_deg + (ch.pattern_hi_deg - ch.pattern_lo_deg) * p / (ch.pattern_points - 1);
            out.push_back({deg, beam_pattern(E, farfield_steering(pos, {deg * kDeg, 0.0}, spec.wavelength()))});
        }
        return out;
    }

    // ---------------------------------------------------------------------

    std::string_view to_string(PlotKind k)
    {
        switch (k)
        {
        case PlotKind::SeVsElements: return "se_vs_elements";
        case PlotKind::Pareto: return "pareto";
        case PlotKind::Beampattern: return "beampattern";
        case PlotKind::NmseVsT: return "nmse_vs_T";
        }
        return "beampattern";
    }

    std::vector<std::string> plot_columns(PlotKind k)
    {
        switch (k)
        {
        case PlotKind::SeVsElements:
            return {"label", "layers", "elements_per_layer", "sum_rate_mean", "sum_rate_std", "seeds"};
        case PlotKind::Pareto: return {"label", "omega", "sum_rate", "worst_target_power"};
        case PlotKind::Beampattern: return {"angle_deg", "power", "label"};
        case PlotKind::NmseVsT: return {"label", "slots", "nmse_mean", "seeds"};
        }
        return {};
    }

    std::string format_double(double v)
    {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    }

    std::string emit_plotdata(std::span<const PlotRecord> records, PlotKind kind)
    {
        if (records.empty())
            fail(ErrorCode::InvalidArgument, "no results to emit");
        for (const auto &r : records)
            if (r.kind != kind)
                fail(ErrorCode::HeterogeneousResults, "result of kind " + std::string(to_string(r.kind)) +
                                                          " in a " + std::string(to_string(kind)) + " table");
        const auto cols = plot_columns(kind);
        std::string out;
        for (std::size_t i = 0; i < cols.size(); ++i)
            out += (i ? "," : "") + cols[i];
        out += "\n";
        for (const auto &r : records)
        {
            for (std::size_t i = 0; i < cols.size(); ++i)
            {
                if (i)
                    out += ",";
                if (cols[i] == "label")
                {
                    if (r.label.find_first_of(",\"\n") == std::string::npos)
                        out += r.label;
                    else
                    {
                        out += '"';
                        for (char ch : r.label)
                            out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                        out += '"';
                    }
                    continue;
                }
                auto it = r.values.find(cols[i]);
                if (it == r.values.end())
                    fail(ErrorCode::InvalidArgument, "record is missing column " + cols[i]);
                out += format_double(it->second);
            }
            out += "\n";
        }
        return out;
    }

    std::string_view to_string(Command c)
    {
        switch (c)
        {
        case Command::Simulate: return "simulate";
        case Command::Optimize: return "optimize";
        case Command::Estimate: return "estimate";
        case Command::Waveform: return "waveform";
        case Command::Sweep: return "sweep";
        case Command::Pareto: return "pareto";
        }
        return "simulate";
    }

    std::optional<Command> parse_command(std::string_view s)
    {
        for (auto c : {Command::Simulate, Command::Optimize, Command::Estimate, Command::Waveform, Command::Sweep,
                       Command::Pareto})
            if (to_string(c) == s)
                return c;
        return std::nullopt;
    }

    RunOutput run(Command command, const ScenarioConfig &cfg, const RunOptions &opt)
    {
        if (cfg.seeds.empty())
            fail(ErrorCode::InvalidArgument, "at least one seed is required");
        switch (command)
        {
        case Command::Simulate:
        case Command::Optimize: return run_simulate(command, cfg, opt);
        case Command::Estimate: return run_estimate(cfg, opt);
        case Command::Waveform: return run_waveform(cfg, opt);
        case Command::Sweep: return run_sweep(cfg, opt);
        case Command::Pareto: return run_pareto(cfg, opt);
        }
        fail(ErrorCode::InvalidArgument, "unknown command");
    }

    void write_output(const RunOutput &out, const std::filesystem::path &dir)
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec)
            fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
        auto write = [&](const std::string &name, const std::string &body)
        {
            std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
            if (!f || !(f << body))
                fail(ErrorCode::IoError, "cannot write " + (dir / name).string());
        };
        write("result.json", out.result_json);
        for (const auto &[name, body] : out.side_files)
            write(name, body);
    }

    std::string error_json(const Error &e)
    {
        ojson err{{"code", e.code_name()}, {"message", e.what()}};
        if (const auto *ce = dynamic_cast<const ConfigError *>(&e))
        {
            ojson v = ojson::array();
            for (const auto &x : ce->violations())
                v.push_back(ojson{{"path", x.path}, {"message", x.message}});
            err["violations"] = v;
        }
        return ojson{{"error", err}, {"library_version", library_version()}}.dump(2) + "\n";
    }
}

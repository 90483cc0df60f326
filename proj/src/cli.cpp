#include "pwh/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pwh/errors.hpp"
#include "pwh/systems.hpp"

namespace pwh {

namespace {

constexpr std::pair<Experiment, std::string_view> kExperimentNames[] = {
    {Experiment::scales_check, "scales-check"}, {Experiment::split, "split"},
    {Experiment::grow_manifold, "grow-manifold"}, {Experiment::shadow, "shadow"},
    {Experiment::expansivity, "expansivity"},   {Experiment::perturb_verify, "perturb-verify"},
    {Experiment::conjugacy, "conjugacy"},
};

[[noreturn]] void config_error(std::string_view section, std::string_view key, const std::string& what) {
    fail(ErrorCode::ConfigError, "[" + std::string(section) + "] " + std::string(key) + ": " + what);
}

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, out);
    return r.ec == std::errc() && r.ptr == end;
}

std::vector<std::string_view> split_list(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == ',' || text[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != ',' && text[j] != '\t') ++j;
        if (j > i) out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

/// One config key: how to print it and how to read it back.
struct Field {
    std::string_view section;
    std::string_view key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <class Proj>
Field real(std::string_view section, std::string_view key, Proj proj) {
    return {section, key, [proj](const RunConfig& c) { return format_double(proj(const_cast<RunConfig&>(c))); },
            [proj, section, key](RunConfig& c, std::string_view v) {
                double x = 0.0;
                if (!parse_number(v, x) || !std::isfinite(x)) config_error(section, key, "not a finite number");
                proj(c) = x;
            }};
}

template <class Proj>
Field integer(std::string_view section, std::string_view key, Proj proj) {
    return {section, key, [proj](const RunConfig& c) { return std::to_string(proj(const_cast<RunConfig&>(c))); },
            [proj, section, key](RunConfig& c, std::string_view v) {
                std::remove_reference_t<decltype(proj(c))> x{};
                if (!parse_number(v, x)) config_error(section, key, "not an integer in range");
                proj(c) = x;
            }};
}

template <class Proj>
Field boolean(std::string_view section, std::string_view key, Proj proj) {
    return {section, key, [proj](const RunConfig& c) { return proj(const_cast<RunConfig&>(c)) ? "true" : "false"; },
            [proj, section, key](RunConfig& c, std::string_view v) {
                if (v == "true") proj(c) = true;
                else if (v == "false") proj(c) = false;
                else config_error(section, key, "expected true or false");
            }};
}

template <class Proj>
Field real_list(std::string_view section, std::string_view key, Proj proj) {
    return {section, key,
            [proj](const RunConfig& c) {
                std::string out;
                for (double x : proj(const_cast<RunConfig&>(c))) {
                    if (!out.empty()) out += ' ';
                    out += format_double(x);
                }
                return out;
            },
            [proj, section, key](RunConfig& c, std::string_view v) {
                std::vector<double> xs;
                for (std::string_view item : split_list(v)) {
                    double x = 0.0;
                    if (!parse_number(item, x) || !std::isfinite(x)) config_error(section, key, "not a number list");
                    xs.push_back(x);
                }
                proj(c) = std::move(xs);
            }};
}

template <class Proj, class E, std::size_t N>
Field choice(std::string_view section, std::string_view key, Proj proj,
             const std::pair<E, std::string_view> (&names)[N]) {
    return {section, key,
            [proj, &names](const RunConfig& c) {
                const E value = proj(const_cast<RunConfig&>(c));
                for (const auto& [e, name] : names)
                    if (e == value) return std::string(name);
                return std::string("?");
            },
            [proj, section, key, &names](RunConfig& c, std::string_view v) {
                for (const auto& [e, name] : names) {
                    if (name == v) {
                        proj(c) = e;
                        return;
                    }
                }
                std::string allowed;
                for (const auto& [e, name] : names) allowed += (allowed.empty() ? "" : "|") + std::string(name);
                config_error(section, key, "expected " + allowed);
            }};
}

constexpr std::pair<Execution, std::string_view> kExecNames[] = {{Execution::parallel, "parallel"},
                                                                 {Execution::serial, "serial"}};
constexpr std::pair<SystemKind, std::string_view> kSystemNames[] = {{SystemKind::cat, "cat"},
                                                                    {SystemKind::slowdown, "slowdown"}};
constexpr std::pair<GapMode, std::string_view> kModeNames[] = {{GapMode::strict, "strict"},
                                                               {GapMode::relaxed, "relaxed"}};

#define PWH_PROJ(member) [](RunConfig& c) -> auto& { return c.member; }

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = {
        integer("run", "seed", PWH_PROJ(seed)),
        choice("run", "exec", PWH_PROJ(exec), kExecNames),

        choice("system", "kind", PWH_PROJ(system.kind), kSystemNames),
        real("system", "slow_radius", PWH_PROJ(system.slow_radius)),
        real("system", "slow_exponent", PWH_PROJ(system.slow_exponent)),
        real("system", "blend_start", PWH_PROJ(system.blend_start)),
        integer("system", "n_iters", PWH_PROJ(system.n_iters)),

        real("scales", "alpha", PWH_PROJ(scales.alpha)),
        real("scales", "beta", PWH_PROJ(scales.beta)),
        real("scales", "gamma", PWH_PROJ(scales.gamma)),
        real("scales", "delta", PWH_PROJ(scales.delta)),
        real("scales", "eps", PWH_PROJ(scales.eps)),
        real("scales", "r0", PWH_PROJ(scales.r0)),
        real("scales", "c_u", PWH_PROJ(scales.c_u)),
        real("scales", "c_s", PWH_PROJ(scales.c_s)),
        real("scales", "c_f", PWH_PROJ(scales.c_f)),
        real("scales", "c_0", PWH_PROJ(scales.c_0)),

        choice("orbit", "mode", PWH_PROJ(orbit.mode), kModeNames),
        real("orbit", "d_min", PWH_PROJ(orbit.d_min)),
        real("orbit", "product_threshold", PWH_PROJ(orbit.product_threshold)),
        boolean("orbit", "refine_delta", PWH_PROJ(orbit.refine_delta)),

        integer("scales-check", "samples", PWH_PROJ(scales_check.samples)),
        integer("scales-check", "pairs", PWH_PROJ(scales_check.pairs)),
        integer("scales-check", "bisections", PWH_PROJ(scales_check.bisections)),

        integer("split", "grid", PWH_PROJ(split.grid)),
        integer("split", "window", PWH_PROJ(split.window)),
        integer("split", "resolution", PWH_PROJ(split.resolution)),
        real("split", "pi_min", PWH_PROJ(split.pi_min)),
        real("split", "inner_fraction", PWH_PROJ(split.inner_fraction)),

        integer("grow-manifold", "pairs", PWH_PROJ(grow_manifold.pairs)),
        real("grow-manifold", "kick_fraction", PWH_PROJ(grow_manifold.kick_fraction)),
        integer("grow-manifold", "window", PWH_PROJ(grow_manifold.window)),
        integer("grow-manifold", "linear_slopes", PWH_PROJ(grow_manifold.linear_slopes)),

        integer("shadow", "orbits", PWH_PROJ(shadow.orbits)),
        integer("shadow", "window", PWH_PROJ(shadow.window)),
        real_list("shadow", "kick_fractions", PWH_PROJ(shadow.kick_fractions)),
        real("shadow", "min_base_distance", PWH_PROJ(shadow.min_base_distance)),
        integer("shadow", "linear_orbits", PWH_PROJ(shadow.linear_orbits)),

        integer("expansivity", "pairs", PWH_PROJ(expansivity.pairs)),
        real("expansivity", "separation", PWH_PROJ(expansivity.separation)),
        integer("expansivity", "window", PWH_PROJ(expansivity.window)),
        real("expansivity", "min_base_distance", PWH_PROJ(expansivity.min_base_distance)),

        real("perturbation", "center_u", PWH_PROJ(perturbation.center_u)),
        real("perturbation", "center_v", PWH_PROJ(perturbation.center_v)),
        real("perturbation", "radius", PWH_PROJ(perturbation.radius)),
        real("perturbation", "direction_angle", PWH_PROJ(perturbation.direction_angle)),
        real("perturbation", "amplitude_fraction", PWH_PROJ(perturbation.amplitude_fraction)),
        real("perturbation", "xi0", PWH_PROJ(perturbation.xi0)),
        integer("perturbation", "budget_grid", PWH_PROJ(perturbation.budget_grid)),
        integer("perturbation", "grid", PWH_PROJ(perturbation.grid)),

        integer("conjugacy", "grid", PWH_PROJ(conjugacy.grid)),
        integer("conjugacy", "window", PWH_PROJ(conjugacy.window)),
        integer("conjugacy", "injectivity_pairs", PWH_PROJ(conjugacy.injectivity_pairs)),
        real("conjugacy", "injectivity_separation", PWH_PROJ(conjugacy.injectivity_separation)),
        integer("conjugacy", "injectivity_max_n", PWH_PROJ(conjugacy.injectivity_max_n)),
        real_list("conjugacy", "continuity_lambdas", PWH_PROJ(conjugacy.continuity_lambdas)),
    };
    return fields;
}

#undef PWH_PROJ

void require(bool ok, std::string_view section, std::string_view key, const std::string& what) {
    if (!ok) config_error(section, key, what);
}

}  // namespace

std::string_view experiment_name(Experiment e) {
    for (const auto& [x, name] : kExperimentNames)
        if (x == e) return name;
    return "?";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
    for (const auto& [x, n] : kExperimentNames)
        if (n == name) return x;
    return std::nullopt;
}

const std::vector<Experiment>& all_experiments() {
    static const std::vector<Experiment> all = [] {
        std::vector<Experiment> out;
        for (const auto& [x, n] : kExperimentNames) out.push_back(x);
        return out;
    }();
    return all;
}

void RunConfig::validate() const {
    scales.validate();
    if (system.kind == SystemKind::slowdown) {
        require(system.slow_radius > 0.0 && system.slow_radius < max_slow_radius(), "system", "slow_radius",
                "must lie in (0, " + format_double(max_slow_radius()) + ")");
        require(system.slow_exponent > 0.0, "system", "slow_exponent", "must be positive");
        require(system.blend_start > 0.0 && system.blend_start < 1.0, "system", "blend_start", "must lie in (0, 1)");
    }
    require(system.n_iters >= 2, "system", "n_iters", "must be at least 2");

    require(orbit.d_min > 0.0 && orbit.d_min < scales.r0, "orbit", "d_min", "must lie in (0, r0)");
    require(orbit.product_threshold > 0.0 && orbit.product_threshold < 1.0, "orbit", "product_threshold",
            "must lie in (0, 1)");

    require(scales_check.samples >= 1, "scales-check", "samples", "must be positive");
    require(scales_check.pairs >= 1, "scales-check", "pairs", "must be positive");
    require(scales_check.bisections >= 1, "scales-check", "bisections", "must be positive");

    require(split.grid >= 2, "split", "grid", "must be at least 2");
    require(split.window >= 1, "split", "window", "must be positive");
    require(split.resolution >= 2, "split", "resolution", "must be at least 2");
    require(split.pi_min > 1.0, "split", "pi_min", "must exceed 1");
    require(split.inner_fraction > 0.0 && split.inner_fraction < 1.0, "split", "inner_fraction",
            "must lie in (0, 1)");

    require(grow_manifold.pairs >= 1, "grow-manifold", "pairs", "must be positive");
    require(grow_manifold.kick_fraction >= 0.0 && grow_manifold.kick_fraction < 1.0, "grow-manifold",
            "kick_fraction", "must lie in [0, 1)");
    require(grow_manifold.window >= 1, "grow-manifold", "window", "must be positive");
    require(grow_manifold.linear_slopes >= 2, "grow-manifold", "linear_slopes", "must be at least 2");

    require(shadow.orbits >= 1, "shadow", "orbits", "must be positive");
    require(shadow.window >= 1, "shadow", "window", "must be positive");
    require(!shadow.kick_fractions.empty(), "shadow", "kick_fractions", "must not be empty");
    for (double k : shadow.kick_fractions)
        require(k >= 0.0, "shadow", "kick_fractions", "entries must be nonnegative");
    require(shadow.min_base_distance >= 0.0 && shadow.min_base_distance < kRho, "shadow", "min_base_distance",
            "must lie in [0, 0.5)");
    require(shadow.linear_orbits >= 0, "shadow", "linear_orbits", "must be nonnegative");

    require(expansivity.pairs >= 1, "expansivity", "pairs", "must be positive");
    require(expansivity.separation > 0.0 && expansivity.separation < kRho, "expansivity", "separation",
            "must lie in (0, 0.5)");
    require(expansivity.window >= 0, "expansivity", "window", "must be nonnegative");
    require(expansivity.min_base_distance >= 0.0 && expansivity.min_base_distance < kRho, "expansivity",
            "min_base_distance", "must lie in [0, 0.5)");

    require(perturbation.center_u >= 0.0 && perturbation.center_u < 1.0, "perturbation", "center_u",
            "must lie in [0, 1)");
    require(perturbation.center_v >= 0.0 && perturbation.center_v < 1.0, "perturbation", "center_v",
            "must lie in [0, 1)");
    require(perturbation.radius > 0.0 && perturbation.radius < kRho, "perturbation", "radius",
            "must lie in (0, 0.5)");
    require(perturbation.amplitude_fraction >= 0.0, "perturbation", "amplitude_fraction", "must be nonnegative");
    require(perturbation.xi0 > 0.0 && perturbation.xi0 <= 1.0, "perturbation", "xi0", "must lie in (0, 1]");
    require(perturbation.budget_grid >= 2, "perturbation", "budget_grid", "must be at least 2");
    require(perturbation.grid >= 2, "perturbation", "grid", "must be at least 2");

    require(conjugacy.grid >= 2, "conjugacy", "grid", "must be at least 2");
    require(conjugacy.window >= 1, "conjugacy", "window", "must be positive");
    require(conjugacy.injectivity_pairs >= 0, "conjugacy", "injectivity_pairs", "must be nonnegative");
    require(conjugacy.injectivity_separation > 0.0 && conjugacy.injectivity_separation < kRho, "conjugacy",
            "injectivity_separation", "must lie in (0, 0.5)");
    require(conjugacy.injectivity_max_n >= 1, "conjugacy", "injectivity_max_n", "must be positive");
    for (double l : conjugacy.continuity_lambdas)
        require(l > 0.0, "conjugacy", "continuity_lambdas", "entries must be positive");
}

RunConfig parse_config(std::string_view text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in{std::string(text)};
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorCode::ConfigError, std::string("malformed config: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) fail(ErrorCode::ConfigError, "key '" + section + "' outside any section");
        bool known_section = false;
        for (const Field& f : schema()) known_section = known_section || f.section == section;
        if (!known_section) fail(ErrorCode::ConfigError, "unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            const auto it = std::find_if(schema().begin(), schema().end(),
                                         [&](const Field& f) { return f.section == section && f.key == key; });
            if (it == schema().end()) config_error(section, key, "unknown key");
            it->set(cfg, value.data());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    std::string_view current;
    for (const Field& f : schema()) {
        if (f.section != current) {
            if (!out.empty()) out += '\n';
            out += '[';
            out += f.section;
            out += "]\n";
            current = f.section;
        }
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

bool ExperimentResult::pass() const { return first_failure() == nullptr; }

const Assertion* ExperimentResult::first_failure() const {
    for (const Assertion& a : assertions)
        if (!a.pass) return &a;
    return nullptr;
}

nlohmann::json report_json(const RunConfig& cfg, const ExperimentResult& result) {
    nlohmann::json assertions = nlohmann::json::array();
    for (const Assertion& a : result.assertions) {
        assertions.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    }
    return {
        {"schema", kReportSchema},
        {"experiment", experiment_name(result.experiment)},
        {"seed", cfg.seed},
        {"config", serialize_config(cfg)},
        {"pass", result.pass()},
        {"assertions", std::move(assertions)},
        {"results", result.results},
    };
}

std::vector<std::filesystem::path> emit_report(const RunConfig& cfg, const ExperimentResult& result,
                                               const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
    const std::string suffix = "-" + std::to_string(cfg.seed);
    auto write = [&](const std::filesystem::path& p, const std::string& content) {
        std::ofstream out(p, std::ios::binary);
        out << content;
        out.close();
        if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
    };
    std::vector<std::filesystem::path> written;
    written.push_back(out_dir / (std::string(experiment_name(result.experiment)) + suffix + ".json"));
    write(written.back(), report_json(cfg, result).dump(2) + "\n");
    for (const CsvArtifact& csv : result.csv) {
        written.push_back(out_dir / (csv.name + suffix + ".csv"));
        write(written.back(), csv.content);
    }
    return written;
}

int run(Experiment e, const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
    try {
        cfg.validate();
        const ExperimentResult result = run_experiment(e, cfg);
        for (const auto& path : emit_report(cfg, result, out_dir)) log << "wrote " << path.string() << '\n';
        for (const Assertion& a : result.assertions) {
            log << (a.pass ? "ok     " : "FAILED ") << a.name;
            if (!a.detail.empty()) log << ": " << a.detail;
            log << '\n';
        }
        if (const Assertion* bad = result.first_failure()) {
            log << error_name(ErrorCode::AssertionFailure) << ": " << bad->name << '\n';
            return 1;
        }
        return 0;
    } catch (const Error& err) {
        log << err.what() << '\n';
        return err.code() == ErrorCode::ConfigError || err.code() == ErrorCode::IoError ? 2 : 1;
    }
}

}  // namespace pwh

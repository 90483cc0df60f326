#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pwh/cli.hpp"
#include "pwh/errors.hpp"

using namespace pwh;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvariantViolation;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("pwh-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kSmallShadow = R"([run]
seed = 7

[system]
kind = cat

[shadow]
orbits = 6
window = 30
linear_orbits = 2
)";

}  // namespace

TEST_CASE("experiment names round trip") {
    for (Experiment e : all_experiments()) CHECK(parse_experiment(experiment_name(e)) == e);
    CHECK(parse_experiment("grow-manifold") == Experiment::grow_manifold);
    CHECK_FALSE(parse_experiment("bogus").has_value());
}

TEST_CASE("config serialization round trips byte for byte") {
    RunConfig cfg;
    cfg.seed = 12345;
    cfg.scales.eps = 0.1;
    cfg.scales.r0 = 0.1;
    cfg.system.kind = SystemKind::slowdown;
    cfg.shadow.kick_fractions = {0.0, 0.3};
    cfg.conjugacy.continuity_lambdas = {1.0, 1e-3, 1e-5};
    const std::string text = serialize_config(cfg);
    const RunConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.seed == 12345);
    CHECK(back.scales.eps == 0.1);
    CHECK(back.shadow.kick_fractions.size() == 2);
    CHECK(serialize_config(parse_config(serialize_config(RunConfig{}))) == serialize_config(RunConfig{}));
    // Every shipped config parses.
    for (const auto& entry : fs::directory_iterator(PWH_CONFIG_DIR)) {
        CAPTURE(entry.path().string());
        const RunConfig c = load_config(entry.path());
        CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
    }
}

TEST_CASE("config errors") {
    CHECK(code_of([] { parse_config("[shadow]\norbitz = 3\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config("[nonsense]\na = 1\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config("[shadow]\norbits = many\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config("[system]\nkind = henon\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { load_config("/nonexistent/pwh.ini"); }) != ErrorCode::AssertionFailure);
    try {
        // alpha - beta/gamma = 0.545, so delta = 0.6 breaks the hypothesis.
        parse_config("[scales]\ndelta = 0.6\n");
        FAIL("accepted delta = 0.6");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        CHECK(std::string(e.what()).find("Assumption R") != std::string::npos);
    }
    RunConfig cfg;
    cfg.scales.delta = 0.6;
    std::ostringstream log;
    CHECK(run(Experiment::scales_check, cfg, fresh_dir("bad"), log) == 2);
    CHECK(log.str().find("Assumption R") != std::string::npos);
}

TEST_CASE("reports are named by experiment and seed and are deterministic") {
    const RunConfig cfg = parse_config(kSmallShadow);
    const fs::path a = fresh_dir("det-a");
    const fs::path b = fresh_dir("det-b");
    std::ostringstream log;
    REQUIRE(run(Experiment::shadow, cfg, a, log) == 0);
    RunConfig serial = cfg;
    serial.exec = Execution::serial;
    REQUIRE(run(Experiment::shadow, serial, b, log) == 0);
    const fs::path c = fresh_dir("det-c");
    REQUIRE(run(Experiment::shadow, cfg, c, log) == 0);
    CHECK(fs::exists(a / "shadow-7.json"));
    CHECK(fs::exists(a / "orbit-7.csv"));
    CHECK(slurp(a / "shadow-7.json") == slurp(c / "shadow-7.json"));
    CHECK(slurp(a / "orbit-7.csv") == slurp(c / "orbit-7.csv"));
    // Serial and parallel runs differ only in the recorded exec key.
    nlohmann::json ja = nlohmann::json::parse(slurp(a / "shadow-7.json"));
    nlohmann::json jb = nlohmann::json::parse(slurp(b / "shadow-7.json"));
    ja.erase("config");
    jb.erase("config");
    CHECK(ja.dump() == jb.dump());
    CHECK(slurp(a / "orbit-7.csv") == slurp(b / "orbit-7.csv"));

    const nlohmann::json j = nlohmann::json::parse(slurp(a / "shadow-7.json"));
    CHECK(j["schema"] == std::string(kReportSchema));
    CHECK(j["experiment"] == "shadow");
    CHECK(j["seed"] == 7);
    CHECK(j["pass"] == true);
    CHECK(j["assertions"].is_array());
    REQUIRE(j["config"].is_string());
    CHECK(serialize_config(parse_config(j["config"].get<std::string>())) == serialize_config(cfg));
    const std::string csv = slurp(a / "orbit-7.csv");
    CHECK(csv.rfind("n,x_u,x_v,z_u,z_v,gap,bound,backward_gap,backward_bound\n", 0) == 0);

    RunConfig other = cfg;
    other.seed = 8;
    REQUIRE(run(Experiment::shadow, other, a, log) == 0);
    CHECK(fs::exists(a / "shadow-8.json"));
    CHECK(slurp(a / "shadow-8.json") != slurp(a / "shadow-7.json"));
}

TEST_CASE("failed assertions and unwritable output") {
    RunConfig cfg = parse_config(kSmallShadow);
    cfg.shadow.kick_fractions = {2.0};
    std::ostringstream log;
    CHECK(run(Experiment::shadow, cfg, fresh_dir("fail"), log) == 1);
    CHECK(log.str().find("AssertionFailure") != std::string::npos);

    const fs::path file = fresh_dir("io") / "not-a-dir";
    std::ofstream(file) << "x";
    CHECK(run(Experiment::shadow, parse_config(kSmallShadow), file, log) == 2);
}

TEST_CASE("zero-amplitude conjugacy is the identity") {
    RunConfig cfg = parse_config("[perturbation]\namplitude_fraction = 0\n\n[conjugacy]\ngrid = 4\nwindow = 30\n"
                                 "injectivity_pairs = 4\n");
    const ExperimentResult r = run_experiment(Experiment::conjugacy, cfg);
    for (const Assertion& a : r.assertions) {
        CAPTURE(a.name);
        CAPTURE(a.detail);
        CHECK(a.pass);
    }
    std::ostringstream log;
    CHECK(run(Experiment::conjugacy, cfg, fresh_dir("conj"), log) == 0);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pwh/parallel.hpp"
#include "pwh/scales.hpp"
#include "pwh/shadowing.hpp"

namespace pwh {

enum class Experiment { scales_check, split, grow_manifold, shadow, expansivity, perturb_verify, conjugacy };

std::string_view experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();

enum class SystemKind { cat, slowdown };

struct SystemConfig {
    SystemKind kind = SystemKind::cat;
    double slow_radius = 0.15;
    double slow_exponent = 0.5;
    double blend_start = 0.9;
    /// Iteration cap for splittings; points near a slowed fixed point need thousands.
    int n_iters = 30;
};

struct OrbitConfig {
    GapMode mode = GapMode::strict;
    double d_min = 1e-3;
    double product_threshold = 1e-6;
    bool refine_delta = true;
};

struct ScalesCheckConfig {
    int samples = 10000;
    int pairs = 10000;
    int bisections = 40;
};

struct SplitConfig {
    int grid = 32;
    int window = 20;
    int resolution = 16;
    double pi_min = 1e6;
    double inner_fraction = 0.3;
};

struct GrowManifoldConfig {
    int pairs = 500;
    double kick_fraction = 0.1;
    int window = 30;
    int linear_slopes = 21;
};

struct ShadowConfig {
    int orbits = 1000;
    int window = 100;
    std::vector<double> kick_fractions{0.0, 0.01, 0.1, 0.5};
    double min_base_distance = 0.0;
    /// Orbits compared against linearized_shadow (cat map only).
    int linear_orbits = 20;
};

struct ExpansivityConfig {
    int pairs = 100;
    double separation = 1e-3;
    int window = 6;
    double min_base_distance = 0.0;
};

struct PerturbationConfig {
    double center_u = 0.3;
    double center_v = 0.6;
    double radius = 0.1;
    double direction_angle = 0.0;
    /// Amplitude as a fraction of max_bump_amplitude.
    double amplitude_fraction = 0.5;
    double xi0 = 0.5;
    int budget_grid = 64;
    int grid = 32;
};

struct ConjugacyConfig {
    int grid = 32;
    int window = 100;
    int injectivity_pairs = 100;
    double injectivity_separation = 1e-3;
    int injectivity_max_n = 8;
    std::vector<double> continuity_lambdas{1.0, 1e-3};
};

struct RunConfig {
    std::uint64_t seed = 7;
    Execution exec = Execution::parallel;
    SystemConfig system;
    ScaleParams scales;
    OrbitConfig orbit;
    ScalesCheckConfig scales_check;
    SplitConfig split;
    GrowManifoldConfig grow_manifold;
    ShadowConfig shadow;
    ExpansivityConfig expansivity;
    PerturbationConfig perturbation;
    ConjugacyConfig conjugacy;

    /// Range checks; throws ConfigError naming the section and key.
    void validate() const;
};

/// INI text with sections; unknown sections or keys are rejected. Missing keys keep defaults.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key in a fixed order with shortest round-trip numbers.
std::string serialize_config(const RunConfig& cfg);

struct Assertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CsvArtifact {
    std::string name;  ///< file stem, e.g. "orbit"
    std::string content;
};

struct ExperimentResult {
    Experiment experiment = Experiment::scales_check;
    nlohmann::json results = nlohmann::json::object();
    std::vector<Assertion> assertions;
    std::vector<CsvArtifact> csv;
    bool pass() const;
    /// First failing assertion, if any.
    const Assertion* first_failure() const;
};

inline constexpr std::string_view kReportSchema = "pwh-report/1";

/// Runs the experiment in memory. Library errors become failed assertions.
ExperimentResult run_experiment(Experiment e, const RunConfig& cfg);

/// The JSON document written for a result.
nlohmann::json report_json(const RunConfig& cfg, const ExperimentResult& result);

/// Writes {experiment}-{seed}.json and {csv-name}-{seed}.csv into out_dir. Throws IoError.
std::vector<std::filesystem::path> emit_report(const RunConfig& cfg, const ExperimentResult& result,
                                               const std::filesystem::path& out_dir);

/// Exit status: 0 all assertions pass, 1 an assertion failed, 2 configuration or I/O error.
int run(Experiment e, const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace pwh

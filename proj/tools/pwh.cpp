#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pwh/cli.hpp"
#include "pwh/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Shadowing and stability experiments for torus maps"};
    std::string experiment, config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool print_config = false;

    std::string names;
    for (pwh::Experiment e : pwh::all_experiments()) names += (names.empty() ? "" : "|") + std::string(pwh::experiment_name(e));
    app.add_option("experiment", experiment, names)->required();
    app.add_option("--config", config_path, "INI configuration file")->required();
    app.add_option("--seed", seed, "overrides [run] seed");
    app.add_option("--out", out_dir, "output directory for JSON and CSV files");
    app.add_flag("--print-config", print_config, "print the canonical configuration and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const auto exp = pwh::parse_experiment(experiment);
    if (!exp) {
        std::cerr << "unknown experiment '" << experiment << "', expected one of " << names << '\n';
        return 2;
    }
    pwh::RunConfig cfg;
    try {
        cfg = pwh::load_config(config_path);
        if (seed) cfg.seed = *seed;
    } catch (const pwh::Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    if (print_config) {
        std::cout << pwh::serialize_config(cfg);
        return 0;
    }
    return pwh::run(*exp, cfg, out_dir, std::cout);
}

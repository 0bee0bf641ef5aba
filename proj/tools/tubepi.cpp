#include "tubepi/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"Tube-confined stochastic path integrals"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<int> workers;
    tubepi::RunOptions options;

    app.add_option("--config", config_path, "Experiment config file (key = value)")->required();
    app.add_option("--seed", seed, "Override mc.seed");
    app.add_option("--samples", samples, "Override mc.samples");
    app.add_option("--workers", workers, "Override mc.workers");
    app.add_option("--out", options.out_dir, "Output directory")->capture_default_str();
    app.add_flag("--strict", options.strict, "Exit with 4 when an acceptance check fails");
    app.add_flag("--dump-paths", options.dump_paths, "Also write sample paths");

    auto* propagator = app.add_subcommand("propagator", "Kernel estimate against the selected oracle");
    auto* convergence = app.add_subcommand("convergence", "Riemann-product partition ladder");
    auto* probe = app.add_subcommand("probe", "Admissibility probe of the paths in probe.paths");
    auto* theta = app.add_subcommand("theta-scan", "Theta family: direct estimates against the series");
    auto* dump = app.add_subcommand("dump-paths", "Write the first mc.dump_count sample paths");
    for (auto* sub : {propagator, convergence, probe, theta, dump}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tubepi::kExitConfig;
    }

    try {
        auto config = tubepi::ExperimentConfig::load(config_path);
        if (seed) config.seed = *seed;
        if (samples) config.samples = *samples;
        if (workers) config.workers = *workers;
        config.validate();

        if (*propagator) return tubepi::run_propagator(config, options, std::cout);
        if (*convergence) return tubepi::run_convergence(config, options, std::cout);
        if (*probe) return tubepi::run_probe(config, options, std::cout);
        if (*theta) return tubepi::run_theta_scan(config, options, std::cout);
        return tubepi::run_dump_paths(config, options, std::cout);
    } catch (const tubepi::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tubepi::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tubepi::kExitNumeric;
    }
}

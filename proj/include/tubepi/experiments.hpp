#pragma once

#include "tubepi/config.hpp"
#include "tubepi/ensemble.hpp"
#include "tubepi/errors.hpp"

#include <iosfwd>
#include <string>

namespace tubepi {

struct RunOptions {
    std::string out_dir = "out";
    bool strict = false;
    bool dump_paths = false;
};

// Exit codes of the command-line runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitStrict = 4;

int exit_code_for(ErrorKind kind);

// Trajectory, frame and tube from the config, with tube overrides applied.
// The gauge orbit is restored so that samples are full bridges.
Ensemble build_ensemble(const ExperimentConfig& config);

// Each runner writes its files into options.out_dir (created if missing),
// logs a short summary and returns kExitOk or kExitStrict. Errors propagate.
int run_propagator(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int run_convergence(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int run_probe(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int run_theta_scan(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);
int run_dump_paths(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

// Least-squares slope of log(gap) against log(mesh) over rows with gap > 0.
double fitted_order(const std::vector<double>& meshes, const std::vector<double>& gaps);

}  // namespace tubepi

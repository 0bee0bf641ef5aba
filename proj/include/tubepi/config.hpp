#pragma once

#include "tubepi/accumulator.hpp"
#include "tubepi/dynamics.hpp"
#include "tubepi/potentials.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tubepi {

// Flat key = value experiment description with dotted keys (tube.radius,
// mc.seed). Unknown keys and malformed values are rejected with line numbers.
struct ExperimentConfig {
    // chart
    int dim = 1;
    std::string metric = "flat";  // flat | conformal
    double metric_alpha = 0.0;
    // potential
    std::string potential = "free";  // free | constant | harmonic | quartic | table
    double omega = 1.0;
    double lambda = 1.0;
    double constant_value = 0.0;
    std::string table_file;
    // path
    std::vector<double> start{0.0};
    std::vector<double> end{0.0};
    double duration = 1.0;
    double hbar = 1.0;
    // tube overrides
    std::optional<double> radius;
    std::optional<double> eta;
    std::optional<double> delta_E;
    double coercivity = 1.0;
    double kappa = 0.0;
    int barrier_power = 2;
    // sde
    double sigma = 1.0;
    double xi0 = 0.0;
    int steps = 128;
    std::string law = "reweighted";  // reweighted | drifted
    bool energy_cost = true;
    // mc
    std::size_t samples = 10000;
    std::uint64_t seed = 1;
    std::size_t chunk = 1000;
    int workers = 1;
    std::size_t dump_count = 16;
    // propagator
    std::string oracle = "auto";  // auto | heat | mehler | pde | none
    std::string mode = "euclidean";
    double tolerance_se = 3.0;
    double tolerance_rel = 0.02;
    // convergence
    std::vector<int> ladder{8, 16, 32, 64};
    // theta scan
    std::vector<Complex> thetas{Complex(0.5, 0.0), Complex(1.0, 0.0), Complex(2.0, 0.0), Complex(0.0, -1.0)};
    int theta_order = 10;
    // probe
    std::string probe_paths;
    double pole_guard = 0.05;

    // Directory of the config file; relative file keys resolve against it.
    std::string base_dir;

    static ExperimentConfig parse(std::istream& in, const std::string& origin = "<config>");
    static ExperimentConfig load(const std::string& path);

    // Throws Config on any violated constraint.
    void validate() const;

    // Every key with its effective value, one per line, in a fixed order.
    std::string effective() const;
    // FNV-1a 64 of effective(), skipping the mc.workers line.
    std::uint64_t hash() const;
    std::string hash_hex() const;

    Potential make_potential() const;
    MetricChart make_chart() const;
    SDEParams make_sde() const;
    Signature signature() const;
    Vec start_point() const;
    Vec end_point() const;
    std::string resolve(const std::string& file) const;
};

std::string format_complex(Complex z);
Complex parse_complex(const std::string& text);

}  // namespace tubepi

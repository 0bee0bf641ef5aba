#include "tubepi/experiments.hpp"

#include "tubepi/integrator.hpp"
#include "tubepi/oracles.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace tubepi {

using json = nlohmann::ordered_json;

namespace {

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ofstream open_out(const RunOptions& options, const std::string& name) {
    std::filesystem::create_directories(options.out_dir);
    const auto path = std::filesystem::path(options.out_dir) / name;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Numerical, "cannot write '" + path.string() + "'");
    out << std::setprecision(17);
    return out;
}

json complex_json(std::optional<Complex> z) {
    if (!z) return nullptr;
    return json::array({z->real(), z->imag()});
}

json estimate_json(const KernelEstimate& e, const ExperimentConfig& config) {
    json j;
    j["value_re"] = e.value.real();
    j["value_im"] = e.value.imag();
    j["std_error"] = e.std_error;
    j["n_samples"] = e.n_samples;
    j["mode"] = e.mode;
    j["theta"] = complex_json(e.theta);
    j["partition_mesh"] = e.partition_mesh ? json(*e.partition_mesh) : json(nullptr);
    j["seed"] = e.seed;
    j["config_hash"] = config.hash_hex();
    return j;
}

void write_result(const RunOptions& options, json j) {
    j["timestamp"] = timestamp();
    auto out = open_out(options, "result.json");
    out << j.dump(2) << "\n";
}

void write_effective(const ExperimentConfig& config, const RunOptions& options) {
    auto out = open_out(options, "effective.cfg");
    out << config.effective();
}

void finish_run(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
    write_effective(config, options);
    if (options.dump_paths) {
        RunOptions quiet = options;
        quiet.dump_paths = false;
        run_dump_paths(config, quiet, log);
    }
}

struct OracleValue {
    std::string name = "none";
    std::optional<Complex> value;
};

OracleValue propagator_oracle(const ExperimentConfig& c) {
    const Vec x = c.start_point();
    const Vec y = c.end_point();
    const double T = c.duration;
    const bool lorentz = c.signature() == Signature::Lorentzian;
    const Complex theta = lorentz ? Complex(0.0, -1.0) : Complex(1.0, 0.0);
    std::string name = c.oracle;
    if (c.metric != "flat") return {};
    if (name == "auto") {
        if (c.potential == "free" || c.potential == "constant") name = "heat";
        else if (c.potential == "harmonic" && !lorentz && std::abs(c.sigma * c.sigma - c.hbar) < 1e-12) name = "mehler";
        else if (c.dim == 1) name = "pde";
        else name = "none";
    }
    OracleValue o;
    o.name = name;
    const double heat = heat_kernel(x, y, T, c.sigma);
    if (name == "heat") {
        const double v = c.potential == "constant" ? c.constant_value : 0.0;
        if (c.potential != "free" && c.potential != "constant")
            throw Error(ErrorKind::Config, "heat oracle needs a free or constant potential");
        o.value = v == 0.0 ? Complex(heat, 0.0) : heat * std::exp(-theta * v * T / c.hbar);
    } else if (name == "mehler") {
        if (c.potential != "harmonic" || lorentz)
            throw Error(ErrorKind::Config, "mehler oracle needs a harmonic potential in euclidean mode");
        o.value = Complex(mehler_kernel(x, y, T, c.omega, c.hbar), 0.0);
    } else if (name == "pde") {
        if (c.dim != 1) throw Error(ErrorKind::Config, "pde oracle is one-dimensional");
        const auto pot = c.make_potential();
        const double hbar = c.hbar;
        auto v = [&](double z) { return pot.value(Vec::Constant(1, z)) / hbar; };
        o.value = heat * pde_bridge_expectation(x[0], y[0], T, theta, v, c.sigma);
    }
    return o;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    return kind == ErrorKind::Config || kind == ErrorKind::Parse ? kExitConfig : kExitNumeric;
}

Ensemble build_ensemble(const ExperimentConfig& c) {
    const auto chart = c.make_chart();
    TrajectoryOptions topt;
    topt.steps = c.steps;
    auto traj = solve_classical_trajectory(chart, c.start_point(), c.end_point(), c.duration, topt);
    auto frame = parallel_frame(chart, traj);
    auto spec = TubeSpec::with_defaults(std::move(traj), c.hbar, c.coercivity);
    if (c.radius) spec.radius = *c.radius;
    if (c.eta) spec.eta_action = *c.eta;
    if (c.delta_E) spec.delta_E = *c.delta_E;
    EnsembleOptions eopt;
    eopt.seed = c.seed;
    eopt.samples = c.samples;
    eopt.workers = c.workers;
    eopt.restore_gauge_orbit = true;
    return Ensemble(chart, std::move(spec), std::move(frame), c.make_sde(), eopt);
}

double fitted_order(const std::vector<double>& meshes, const std::vector<double>& gaps) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        if (!(gaps[i] > 0.0)) continue;
        const double lx = std::log(meshes[i]);
        const double ly = std::log(gaps[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

int run_propagator(const ExperimentConfig& c, const RunOptions& options, std::ostream& log) {
    PropagatorOptions popt;
    popt.duration = c.duration;
    popt.hbar = c.hbar;
    popt.seed = c.seed;
    popt.samples = c.samples;
    popt.workers = c.workers;
    popt.mode = c.signature();
    popt.radius = c.radius;
    popt.coercivity = c.coercivity;
    popt.chunk_size = c.chunk;
    popt.trajectory.steps = c.steps;
    const auto chart = c.make_chart();
    const auto result = propagator(chart, c.make_sde(), c.start_point(), c.end_point(), popt);
    const auto oracle = propagator_oracle(c);

    json j = estimate_json(result.estimate, c);
    j["experiment"] = "propagator";
    j["free_kernel"] = result.free_kernel;
    j["expectation_re"] = result.expectation.value.real();
    j["expectation_im"] = result.expectation.value.imag();
    j["in_tube_fraction"] = result.in_tube_fraction;
    bool pass = true;
    json oj;
    oj["name"] = oracle.name;
    if (oracle.value) {
        const Complex ref = *oracle.value;
        const double diff = std::abs(result.estimate.value - ref);
        const double rel = diff / std::abs(ref);
        const double se_multiple = result.estimate.std_error > 0.0 ? diff / result.estimate.std_error : 0.0;
        pass = diff <= c.tolerance_se * result.estimate.std_error + 1e-12 * std::abs(ref) && rel <= c.tolerance_rel;
        oj["value_re"] = ref.real();
        oj["value_im"] = ref.imag();
        oj["abs_error"] = diff;
        oj["rel_error"] = rel;
        oj["se_multiple"] = se_multiple;
        oj["pass"] = pass;
        log << "propagator " << std::setprecision(10) << result.estimate.value << " +- " << result.estimate.std_error
            << " vs " << oracle.name << " " << ref << " (rel " << rel << ", " << se_multiple << " SE) "
            << (pass ? "agree" : "DISAGREE") << "\n";
    } else {
        log << "propagator " << std::setprecision(10) << result.estimate.value << " +- " << result.estimate.std_error
            << " (no oracle)\n";
    }
    j["oracle"] = oj;
    write_result(options, j);

    auto chunks = open_out(options, "chunks.csv");
    chunks << "chunk,count,value_re,value_im,std_error\n";
    for (std::size_t i = 0; i < result.chunks.size(); ++i) {
        const auto& e = result.chunks[i];
        chunks << i << "," << e.n_samples << "," << e.value.real() << "," << e.value.imag() << "," << e.std_error
               << "\n";
    }
    finish_run(c, options, log);
    return options.strict && !pass ? kExitStrict : kExitOk;
}

int run_convergence(const ExperimentConfig& c, const RunOptions& options, std::ostream& log) {
    if (c.ladder.size() < 4) throw Error(ErrorKind::Config, "convergence.ladder needs at least 4 rungs");
    auto ladder = c.ladder;
    std::sort(ladder.begin(), ladder.end());
    const auto ensemble = build_ensemble(c);
    const auto one = Observable::constant(1.0);
    const auto mode = c.signature();

    std::vector<double> meshes, gaps, gap_se;
    std::vector<RiemannProductResult> rows;
    for (int n : ladder) {
        const auto p = PartitionSpec::uniform(ensemble.grid(), n);
        rows.push_back(riemann_product(ensemble, p, one, mode));
        meshes.push_back(p.mesh());
        gaps.push_back(rows.back().mean_abs_gap);
        gap_se.push_back(rows.back().gap_std_error);
    }
    bool inequality = true;
    bool monotone = true;
    auto csv = open_out(options, "convergence.csv");
    csv << "intervals,mesh,mean_abs_gap,gap_se,abs_diff,ip_re,ip_im,std_error,inequality\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double diff = std::abs(r.product.value - r.integral.value);
        const bool ok = diff <= r.mean_abs_gap * (1.0 + 1e-12) + 1e-15;
        inequality = inequality && ok;
        if (i > 0 && gaps[i] > gaps[i - 1] + 2.0 * std::max(gap_se[i], gap_se[i - 1])) monotone = false;
        csv << ladder[i] << "," << meshes[i] << "," << r.mean_abs_gap << "," << r.gap_std_error << "," << diff << ","
            << r.product.value.real() << "," << r.product.value.imag() << "," << r.product.std_error << ","
            << (ok ? "true" : "false") << "\n";
    }
    const double order = fitted_order(meshes, gaps);
    bool all_zero = true;
    for (double g : gaps) all_zero = all_zero && g == 0.0;
    const bool order_ok = all_zero || (std::isfinite(order) && order >= 0.7);

    json j = estimate_json(rows.front().integral, c);
    j["experiment"] = "convergence";
    j["fitted_order"] = std::isfinite(order) ? json(order) : json(nullptr);
    j["exact"] = all_zero;
    j["monotone"] = monotone;
    j["inequality_every_rung"] = inequality;
    write_result(options, j);
    log << "convergence: order " << (std::isfinite(order) ? std::to_string(order) : std::string("n/a"))
        << (all_zero ? " (zero gap at every mesh)" : "") << ", monotone " << monotone << ", inequality "
        << inequality << "\n";
    finish_run(c, options, log);
    return options.strict && !(order_ok && monotone && inequality) ? kExitStrict : kExitOk;
}

int run_probe(const ExperimentConfig& c, const RunOptions& options, std::ostream& log) {
    if (c.probe_paths.empty()) throw Error(ErrorKind::Config, "probe.paths is required for the probe experiment");
    const std::string file = c.resolve(c.probe_paths);
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::Config, "cannot open probe paths '" + file + "'");
    const auto paths = read_paths_csv(in);
    const auto chart = c.make_chart();
    TrajectoryOptions topt;
    topt.steps = c.steps;
    auto traj = solve_classical_trajectory(chart, c.start_point(), c.end_point(), c.duration, topt);
    auto spec = TubeSpec::with_defaults(std::move(traj), c.hbar, c.coercivity);
    if (c.radius) spec.radius = *c.radius;
    if (c.eta) spec.eta_action = *c.eta;
    if (c.delta_E) spec.delta_E = *c.delta_E;
    ProbeOptions popt;
    popt.pole_guard = c.pole_guard;

    auto csv = open_out(options, "probe.csv");
    csv << "path,value,min_margin,delta_S,h1,admissible\n";
    std::size_t admissible = 0, divergent = 0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& p = paths[i];
        if (p.nodes() != spec.trajectory.grid.nodes())
            throw Error(ErrorKind::Shape, "path " + std::to_string(i) + " has " + std::to_string(p.nodes()) +
                                              " nodes, the reference grid has " +
                                              std::to_string(spec.trajectory.grid.nodes()));
        const auto probe = admissibility_probe(chart, p, spec, popt);
        const auto dev = action_deviation(chart, p, spec);
        const double h1 = h1_distance(p, spec.trajectory);
        csv << i << ",";
        if (probe.divergent) csv << "DIVERGENT";
        else csv << probe.value;
        csv << "," << probe.min_margin << "," << dev.delta << "," << h1 << "," << (probe.admissible ? "true" : "false")
            << "\n";
        admissible += probe.admissible ? 1 : 0;
        divergent += probe.divergent ? 1 : 0;
    }
    json j;
    j["experiment"] = "probe";
    j["paths"] = paths.size();
    j["admissible"] = admissible;
    j["divergent"] = divergent;
    j["delta_E"] = spec.delta_E;
    j["E0"] = spec.E0;
    j["config_hash"] = c.hash_hex();
    write_result(options, j);
    log << "probe: " << paths.size() << " paths, " << admissible << " admissible, " << divergent << " divergent\n";
    finish_run(c, options, log);
    return kExitOk;
}

int run_theta_scan(const ExperimentConfig& c, const RunOptions& options, std::ostream& log) {
    const auto ensemble = build_ensemble(c);
    const auto one = Observable::constant(1.0);
    const auto series = theta_series(ensemble, one, c.theta_order);
    const double C = series.sup_density;

    bool all_ok = true;
    auto coeffs = open_out(options, "coefficients.csv");
    coeffs << "n,a_re,a_im,std_error,bound,within_bound\n";
    for (int n = 0; n <= series.order(); ++n) {
        const bool ok = series.coefficient_within_bound(n);
        all_ok = all_ok && ok;
        const auto a = series.coefficients[static_cast<std::size_t>(n)];
        coeffs << n << "," << a.real() << "," << a.imag() << "," << series.std_errors[static_cast<std::size_t>(n)]
               << "," << series.coefficient_bound(n) << "," << (ok ? "true" : "false") << "\n";
    }

    auto csv = open_out(options, "theta_scan.csv");
    csv << "theta_re,theta_im,direct_re,direct_im,direct_se,series_re,series_im,remainder,gap,pass,unit_modulus\n";
    json rows = json::array();
    std::optional<KernelEstimate> headline;
    for (const Complex theta : c.thetas) {
        const auto direct = feynman_kac_expectation(ensemble, one, theta, C).estimate;
        const Complex s = series.evaluate(theta);
        const double rem = series.remainder_bound(theta);
        const double gap = std::abs(direct.value - s);
        const bool ok = gap <= rem + 3.0 * direct.std_error + 1e-12;
        std::string modulus = "";
        if (theta == Complex(0.0, -1.0)) {
            lorentzian_from_theta(ensemble, one, C);
            modulus = "true";
        }
        all_ok = all_ok && ok;
        csv << theta.real() << "," << theta.imag() << "," << direct.value.real() << "," << direct.value.imag() << ","
            << direct.std_error << "," << s.real() << "," << s.imag() << "," << rem << "," << gap << ","
            << (ok ? "true" : "false") << "," << modulus << "\n";
        json r = estimate_json(direct, c);
        r["series_re"] = s.real();
        r["series_im"] = s.imag();
        r["remainder"] = rem;
        r["gap"] = gap;
        r["pass"] = ok;
        rows.push_back(r);
        if (!headline || theta == Complex(1.0, 0.0)) headline = direct;
    }
    json j = estimate_json(*headline, c);
    j["experiment"] = "theta-scan";
    j["order"] = series.order();
    j["sup_density"] = C;
    j["coefficients_within_bound"] = all_ok;
    j["rows"] = rows;
    write_result(options, j);
    log << "theta-scan: " << c.thetas.size() << " thetas, order " << series.order() << ", C = " << C << ", "
        << (all_ok ? "all checks pass" : "CHECK FAILED") << "\n";
    finish_run(c, options, log);
    return options.strict && !all_ok ? kExitStrict : kExitOk;
}

int run_dump_paths(const ExperimentConfig& c, const RunOptions& options, std::ostream& log) {
    const auto ensemble = build_ensemble(c);
    const std::size_t count = std::min(c.dump_count, ensemble.size());
    std::vector<DiscretePath> paths;
    json meta = json::array();
    for (std::size_t i = 0; i < count; ++i) {
        auto s = ensemble.sample(i);
        json m;
        m["index"] = i;
        m["in_tube"] = s.fluctuation.in_tube;
        m["log_girsanov"] = s.fluctuation.log_girsanov;
        m["gauge_mode"] = s.fluctuation.gauge_mode;
        meta.push_back(m);
        paths.push_back(std::move(s.path));
    }
    {
        auto csv = open_out(options, "paths.csv");
        write_paths_csv(csv, paths);
    }
    json j;
    j["file"] = "paths.csv";
    j["seed"] = c.seed;
    j["config_hash"] = c.hash_hex();
    j["radius"] = ensemble.spec().radius;
    j["paths"] = meta;
    auto side = open_out(options, "paths.json");
    side << j.dump(2) << "\n";
    write_effective(c, options);
    log << "dump-paths: wrote " << count << " paths\n";
    return kExitOk;
}

}  // namespace tubepi

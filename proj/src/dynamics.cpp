#include "tubepi/dynamics.hpp"

#include "tubepi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tubepi {

void SDEParams::validate() const {
    if (!(sigma > 0.0)) throw Error(ErrorKind::Domain, "sigma must be positive");
    if (!(barrier_strength >= 0.0)) throw Error(ErrorKind::Domain, "barrier strength must be non-negative");
    if (barrier_power < 2) throw Error(ErrorKind::Domain, "barrier power must be at least 2");
    if (steps < 2) throw Error(ErrorKind::Domain, "need at least two steps");
    if (max_retries < 0) throw Error(ErrorKind::Domain, "max_retries must be non-negative");
}

double FluctuationPath::max_normal_norm() const {
    double m = 0.0;
    for (const auto& c : normal_components) m = std::max(m, c.norm());
    return m;
}

std::vector<Vec> sample_brownian_bridge(int dim, const TimeGrid& grid, double sigma, RandomStream& stream) {
    grid.validate();
    const std::size_t nodes = grid.nodes();
    std::vector<Vec> b(nodes, Vec::Zero(dim));
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double scale = sigma * std::sqrt(grid.dt(k));
        b[k + 1] = b[k];
        for (int i = 0; i < dim; ++i) b[k + 1][i] += scale * stream.gaussian();
    }
    const double T = grid.t.back() - grid.t.front();
    const Vec end = b.back();
    std::vector<Vec> w(nodes);
    for (std::size_t k = 0; k < nodes; ++k) w[k] = b[k] - ((grid.t[k] - grid.t.front()) / T) * end;
    w.front().setZero();
    w.back().setZero();
    return w;
}

double energy_cost(const MetricChart& chart, const ClassicalTrajectory& gamma0, std::size_t node, const Vec& v) {
    const Vec& q = gamma0.points.at(node);
    const Vec& p = gamma0.momenta.at(node);
    if (v.isZero(0.0)) return 0.0;
    const Vec displaced = exp_map(chart, q, v);
    return std::abs(hamiltonian(chart, q, p) - hamiltonian(chart, displaced, p));
}

double energy_cost(const MetricChart& chart, const ClassicalTrajectory& gamma0, double t, const Vec& v) {
    const auto& ts = gamma0.grid.t;
    if (t < ts.front() || t > ts.back()) throw Error(ErrorKind::Domain, "time outside the trajectory grid");
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t k = std::min<std::size_t>(std::distance(ts.begin(), it), ts.size() - 1) - 1;
    const double w = (t - ts[k]) / (ts[k + 1] - ts[k]);
    if (w == 0.0) return energy_cost(chart, gamma0, k, v);
    const Vec q = (1.0 - w) * gamma0.points[k] + w * gamma0.points[k + 1];
    const Vec p = (1.0 - w) * gamma0.momenta[k] + w * gamma0.momenta[k + 1];
    if (v.isZero(0.0)) return 0.0;
    return std::abs(hamiltonian(chart, q, p) - hamiltonian(chart, exp_map(chart, q, v), p));
}

double barrier_potential(double r, const TubeSpec& spec, const SDEParams& params) {
    if (r < 0.0 || r >= spec.radius) throw Error(ErrorKind::Boundary, "radius outside [0, R)");
    if (params.barrier_strength == 0.0) return 0.0;
    const double s = r / spec.radius;
    return params.barrier_strength * std::pow(s, params.barrier_power) / (1.0 - s * s);
}

double barrier_gradient(double r, const TubeSpec& spec, const SDEParams& params) {
    if (r < 0.0 || r >= spec.radius) throw Error(ErrorKind::Boundary, "radius outside [0, R)");
    if (params.barrier_strength == 0.0 || r == 0.0) return 0.0;
    const double s = r / spec.radius;
    const double m = params.barrier_power;
    const double den = 1.0 - s * s;
    return params.barrier_strength / spec.radius *
           (m * std::pow(s, m - 1) / den + 2.0 * std::pow(s, m + 1) / (den * den));
}

namespace {

Vec normal_displacement(const Frame& frame, std::size_t node, const std::vector<int>& normals, const Vec& chi) {
    Vec v = Vec::Zero(frame.dim());
    for (std::size_t i = 0; i < normals.size(); ++i) v += chi[i] * frame.vectors[node].col(normals[i]);
    return v;
}

}  // namespace

Vec fluctuation_drift(const MetricChart& chart, const Frame& frame, const TubeSpec& spec,
                      const SDEParams& params, std::size_t node, const Vec& chi, bool with_barrier) {
    const double t = spec.trajectory.grid.t[node];
    Vec grad = params.xi_at(t) * chi;
    const double r = chi.norm();
    if (params.energy_cost && r >= 1e-12) {
        const auto normals = frame.normal_indices();
        Vec probe = chi;
        for (int i = 0; i < chi.size(); ++i) {
            const double h = fd_step(chi[i]);
            probe[i] = chi[i] + h;
            const double up = energy_cost(chart, spec.trajectory, node, normal_displacement(frame, node, normals, probe));
            probe[i] = chi[i] - h;
            const double down = energy_cost(chart, spec.trajectory, node, normal_displacement(frame, node, normals, probe));
            probe[i] = chi[i];
            grad[i] += (up - down) / (2.0 * h);
        }
    }
    if (with_barrier && params.confined() && r > 0.0) grad += barrier_gradient(r, spec, params) / r * chi;
    const Vec b = -grad / (params.sigma * params.sigma);
    if (!b.allFinite()) throw Error(ErrorKind::Numerical, "non-finite drift");
    return b;
}

FluctuationPath simulate_fluctuation(const MetricChart& chart, const Frame& frame, const TubeSpec& spec,
                                     const SDEParams& params, RandomStream& normal_stream,
                                     RandomStream& longitudinal_stream, SimulationTrace* trace) {
    const auto& grid = spec.trajectory.grid;
    const std::size_t nodes = grid.nodes();
    if (frame.nodes() != nodes) throw Error(ErrorKind::Shape, "frame and trajectory grids differ");
    const auto normals = frame.normal_indices();
    const int m = static_cast<int>(normals.size());
    const double sigma = params.sigma;
    const double T = grid.t.back();

    FluctuationPath path;
    path.normal_components.assign(nodes, Vec::Zero(m));
    if (trace) {
        trace->increments.clear();
        trace->drifts.clear();
        trace->dts.clear();
    }

    Vec chi = Vec::Zero(m);
    Vec z(m);
    Vec next(m);
    bool barrier_live = params.confined();
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double dt = grid.dt(k);
        // Exact bridge transition: mean chi r, variance sigma^2 dt r.
        const double r = (T - grid.t[k + 1]) / (T - grid.t[k]);
        const double eff = (k + 2 == nodes) ? 0.0 : dt * r;
        const double scale = sigma * std::sqrt(eff);
        Vec b = Vec::Zero(m);
        if (m > 0 && (params.xi_at(grid.t[k]) != 0.0 || params.energy_cost || barrier_live))
            b = fluctuation_drift(chart, frame, spec, params, k, chi, barrier_live);
        const double shift_scale = (k + 2 == nodes) ? 0.0 : dt * r;

        const int attempts = barrier_live ? params.max_retries + 1 : 1;
        bool accepted = false;
        for (int a = 0; a < attempts; ++a) {
            for (int i = 0; i < m; ++i) z[i] = normal_stream.gaussian();
            next = r * chi + scale * z;
            if (params.law == SamplingLaw::Drifted) next += shift_scale * b;
            if (!barrier_live || next.norm() < spec.radius) {
                accepted = true;
                break;
            }
        }
        if (k + 2 == nodes) next.setZero();
        if (!accepted) {
            path.in_tube = false;
            barrier_live = false;
        }

        // Reference-law noise increment dB and its Girsanov contribution.
        Vec db = std::sqrt(eff) * z;
        if (params.law == SamplingLaw::Drifted) db += eff * b / sigma;
        path.log_girsanov += b.dot(db) / sigma - 0.5 * b.squaredNorm() * eff / (sigma * sigma);
        if (trace) {
            trace->increments.push_back(db);
            trace->drifts.push_back(b);
            trace->dts.push_back(eff);
        }

        chi = next;
        path.normal_components[k + 1] = chi;
    }
    if (path.max_normal_norm() >= spec.radius) path.in_tube = false;

    const auto bridge = sample_brownian_bridge(1, grid, sigma, longitudinal_stream);
    std::vector<double> lon(nodes);
    for (std::size_t k = 0; k < nodes; ++k) lon[k] = bridge[k][0];
    auto fixed = gauge_fix_longitudinal(grid, lon);
    path.longitudinal = std::move(fixed.values);
    path.gauge_mode = fixed.gauge_mode;
    return path;
}

double girsanov_log_weight(const std::vector<Vec>& increments, const std::vector<Vec>& drifts,
                           const std::vector<double>& dts, double sigma) {
    if (increments.size() != drifts.size() || drifts.size() != dts.size())
        throw Error(ErrorKind::Shape, "girsanov inputs have different lengths");
    double lw = 0.0;
    for (std::size_t k = 0; k < drifts.size(); ++k)
        lw += drifts[k].dot(increments[k]) / sigma - 0.5 * drifts[k].squaredNorm() * dts[k] / (sigma * sigma);
    return lw;
}

double girsanov_log_weight(const SimulationTrace& trace, double sigma) {
    return girsanov_log_weight(trace.increments, trace.drifts, trace.dts, sigma);
}

std::vector<double> gauge_bump(const TimeGrid& grid) {
    const double t0 = grid.t.front();
    const double T = grid.t.back() - t0;
    std::vector<double> phi(grid.nodes());
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double s = grid.t[k] - t0;
        phi[k] = 4.0 * s * (T - s) / (T * T);
    }
    phi.front() = 0.0;
    phi.back() = 0.0;
    return phi;
}

double grid_integral(const TimeGrid& grid, const std::vector<double>& values) {
    if (values.size() != grid.nodes()) throw Error(ErrorKind::Shape, "samples and grid lengths differ");
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) s += 0.5 * grid.dt(k) * (values[k] + values[k + 1]);
    return s;
}

GaugeFixed gauge_fix_longitudinal(const TimeGrid& grid, const std::vector<double>& samples) {
    const auto phi = gauge_bump(grid);
    const double c = grid_integral(grid, samples) / grid_integral(grid, phi);
    GaugeFixed out;
    out.gauge_mode = c;
    out.values.resize(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) out.values[k] = samples[k] - c * phi[k];
    out.values.front() = samples.front();
    out.values.back() = samples.back();
    return out;
}

DiscretePath assemble_path(const MetricChart& chart, const ClassicalTrajectory& gamma0, const Frame& frame,
                           const FluctuationPath& fluct, const AssembleOptions& options) {
    const std::size_t nodes = gamma0.points.size();
    if (fluct.nodes() != nodes || fluct.normal_components.size() != nodes || frame.nodes() != nodes)
        throw Error(ErrorKind::Shape, "fluctuation is not on the trajectory grid");
    const auto normals = frame.normal_indices();
    std::vector<double> phi;
    if (options.restore_gauge_orbit) phi = gauge_bump(gamma0.grid);

    DiscretePath path;
    path.grid = gamma0.grid;
    path.points.resize(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        double lon = fluct.longitudinal[k];
        if (options.restore_gauge_orbit) lon += fluct.gauge_mode * phi[k];
        Vec v = lon * frame.vectors[k].col(frame.tangent_index);
        v += normal_displacement(frame, k, normals, fluct.normal_components[k]);
        path.points[k] = exp_map(chart, gamma0.points[k], v);
    }
    path.points.front() = gamma0.start;
    path.points.back() = gamma0.end;
    return path;
}

std::vector<Vec> frame_coefficients(const MetricChart& chart, const ClassicalTrajectory& gamma0,
                                    const Frame& frame, const std::vector<Vec>& field) {
    if (field.size() != frame.nodes()) throw Error(ErrorKind::Shape, "field is not on the frame grid");
    std::vector<Vec> coeffs(field.size());
    for (std::size_t k = 0; k < field.size(); ++k)
        coeffs[k] = frame.vectors[k].transpose() * chart.metric(gamma0.points[k]) * field[k];
    return coeffs;
}

double component_h1_norm(const TimeGrid& grid, const std::vector<Vec>& values) {
    if (values.size() != grid.nodes()) throw Error(ErrorKind::Shape, "field is not on the grid");
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double dt = grid.dt(k);
        s += 0.5 * dt * (values[k].squaredNorm() + values[k + 1].squaredNorm());
        s += (values[k + 1] - values[k]).squaredNorm() / dt;
    }
    return std::sqrt(s);
}

double covariant_h1_norm(const MetricChart& chart, const ClassicalTrajectory& gamma0,
                         const std::vector<Vec>& field) {
    const auto& grid = gamma0.grid;
    if (field.size() != grid.nodes()) throw Error(ErrorKind::Shape, "field is not on the grid");
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < field.size(); ++k) {
        const double dt = grid.dt(k);
        s += 0.5 * dt * (chart.inner(gamma0.points[k], field[k], field[k]) +
                         chart.inner(gamma0.points[k + 1], field[k + 1], field[k + 1]));
        const Vec mid = 0.5 * (gamma0.points[k] + gamma0.points[k + 1]);
        const Vec vel = (gamma0.points[k + 1] - gamma0.points[k]) / dt;
        const Vec u_mid = 0.5 * (field[k] + field[k + 1]);
        Vec cov = (field[k + 1] - field[k]) / dt;
        if (!chart.is_flat()) cov += christoffel(chart, mid).apply(vel, u_mid);
        s += dt * chart.inner(mid, cov, cov);
    }
    return std::sqrt(s);
}

}  // namespace tubepi

#include "tubepi/geometry.hpp"

#include "tubepi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tubepi {

MetricChart MetricChart::flat(int dim, ScalarField potential, VectorField potential_gradient) {
    if (dim <= 0) throw Error(ErrorKind::Domain, "chart dimension must be positive");
    MetricChart c;
    c.dim_ = dim;
    c.kind_ = MetricKind::Flat;
    c.potential_ = std::move(potential);
    c.potential_gradient_ = std::move(potential_gradient);
    return c;
}

MetricChart MetricChart::user(int dim, MetricField metric, ScalarField potential,
                              VectorField potential_gradient, double injectivity_radius) {
    if (dim <= 0) throw Error(ErrorKind::Domain, "chart dimension must be positive");
    MetricChart c;
    c.dim_ = dim;
    c.kind_ = MetricKind::UserSupplied;
    c.metric_ = std::move(metric);
    c.potential_ = std::move(potential);
    c.potential_gradient_ = std::move(potential_gradient);
    c.injectivity_radius_ = injectivity_radius;
    return c;
}

Mat MetricChart::metric(const Vec& q) const {
    if (is_flat()) return Mat::Identity(dim_, dim_);
    return metric_(q);
}

Mat MetricChart::inverse_metric(const Vec& q) const {
    if (is_flat()) return Mat::Identity(dim_, dim_);
    const Mat g = metric_(q);
    Eigen::LDLT<Mat> ldlt(g);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-14 * std::max(1.0, g.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::DegenerateMetric, "metric is not invertible at the queried point");
    }
    return ldlt.solve(Mat::Identity(dim_, dim_));
}

double fd_step(double q) { return 1e-5 * (1.0 + std::abs(q)); }

Vec MetricChart::potential_gradient(const Vec& q) const {
    if (potential_gradient_) return potential_gradient_(q);
    Vec grad(dim_);
    Vec qp = q;
    Vec qm = q;
    for (int l = 0; l < dim_; ++l) {
        const double h = fd_step(q[l]);
        qp[l] = q[l] + h;
        qm[l] = q[l] - h;
        grad[l] = (potential_(qp) - potential_(qm)) / (2.0 * h);
        qp[l] = q[l];
        qm[l] = q[l];
    }
    return grad;
}

double MetricChart::inner(const Vec& q, const Vec& u, const Vec& v) const {
    if (is_flat()) return u.dot(v);
    return u.dot(metric_(q) * v);
}

double MetricChart::norm(const Vec& q, const Vec& v) const {
    return std::sqrt(std::max(0.0, inner(q, v, v)));
}

double MetricChart::min_eigenvalue(const Vec& q) const {
    if (is_flat()) return 1.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(metric_(q), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Mat Christoffel::contract(const Vec& v) const {
    const int n = static_cast<int>(upper.size());
    Mat a = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) a.row(k) = v.transpose() * upper[k];
    return a;
}

Vec Christoffel::apply(const Vec& v, const Vec& w) const {
    const int n = static_cast<int>(upper.size());
    Vec out(n);
    for (int k = 0; k < n; ++k) out[k] = v.dot(upper[k] * w);
    return out;
}

namespace {

// dg[l] = d g / d q^l by central differences.
std::vector<Mat> metric_derivatives(const MetricChart& chart, const Vec& q) {
    const int n = chart.dim();
    std::vector<Mat> dg(n);
    Vec qp = q;
    Vec qm = q;
    for (int l = 0; l < n; ++l) {
        const double h = fd_step(q[l]);
        qp[l] = q[l] + h;
        qm[l] = q[l] - h;
        dg[l] = (chart.metric(qp) - chart.metric(qm)) / (2.0 * h);
        qp[l] = q[l];
        qm[l] = q[l];
    }
    return dg;
}

}  // namespace

Christoffel christoffel(const MetricChart& chart, const Vec& q) {
    const int n = chart.dim();
    Christoffel gamma;
    gamma.upper.assign(n, Mat::Zero(n, n));
    if (chart.is_flat()) return gamma;

    const Mat ginv = chart.inverse_metric(q);
    const auto dg = metric_derivatives(chart, q);
    // lowered[l](i, j) = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    std::vector<Mat> lowered(n, Mat::Zero(n, n));
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                lowered[l](i, j) = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) gamma.upper[k] += ginv(k, l) * lowered[l];
    // Symmetrize against rounding so Gamma^k_ij == Gamma^k_ji bitwise.
    for (int k = 0; k < n; ++k) gamma.upper[k] = 0.5 * (gamma.upper[k] + gamma.upper[k].transpose()).eval();
    return gamma;
}

double hamiltonian(const MetricChart& chart, const Vec& q, const Vec& p) {
    if (chart.is_flat()) return 0.5 * p.squaredNorm() + chart.potential(q);
    return 0.5 * p.dot(chart.inverse_metric(q) * p) + chart.potential(q);
}

TimeGrid TimeGrid::uniform(double T, int steps) {
    if (!(T > 0.0)) throw Error(ErrorKind::Domain, "duration must be positive");
    if (steps < 1) throw Error(ErrorKind::Domain, "grid needs at least one step");
    TimeGrid g;
    g.t.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) g.t[k] = T * static_cast<double>(k) / steps;
    g.t.back() = T;
    return g;
}

void TimeGrid::validate() const {
    if (t.size() < 2) throw Error(ErrorKind::Shape, "grid needs at least two nodes");
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
        if (!(t[k + 1] > t[k])) throw Error(ErrorKind::Shape, "grid times must be strictly increasing");
}

double ClassicalTrajectory::max_energy_drift(const MetricChart& chart) const {
    double drift = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k)
        drift = std::max(drift, std::abs(hamiltonian(chart, points[k], momenta[k]) - energy));
    return drift;
}

namespace {

struct PhasePoint {
    Vec q;
    Vec p;
};

PhasePoint hamilton_rhs(const MetricChart& chart, const Vec& q, const Vec& p) {
    if (chart.is_flat()) return {p, -chart.potential_gradient(q)};
    const Vec qdot = chart.inverse_metric(q) * p;
    const auto dg = metric_derivatives(chart, q);
    Vec pdot = -chart.potential_gradient(q);
    for (int l = 0; l < chart.dim(); ++l) pdot[l] += 0.5 * qdot.dot(dg[l] * qdot);
    return {qdot, pdot};
}

}  // namespace

ClassicalTrajectory integrate_hamiltonian(const MetricChart& chart, const Vec& q0, const Vec& p0,
                                          double duration, int steps) {
    ClassicalTrajectory traj;
    traj.grid = TimeGrid::uniform(duration, steps);
    traj.points.resize(steps + 1);
    traj.momenta.resize(steps + 1);
    traj.velocities.resize(steps + 1);
    Vec q = q0;
    Vec p = p0;
    traj.points[0] = q;
    traj.momenta[0] = p;
    for (int k = 0; k < steps; ++k) {
        const double h = traj.grid.dt(k);
        const auto k1 = hamilton_rhs(chart, q, p);
        const auto k2 = hamilton_rhs(chart, q + 0.5 * h * k1.q, p + 0.5 * h * k1.p);
        const auto k3 = hamilton_rhs(chart, q + 0.5 * h * k2.q, p + 0.5 * h * k2.p);
        const auto k4 = hamilton_rhs(chart, q + h * k3.q, p + h * k3.p);
        q += h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
        p += h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        if (!q.allFinite() || !p.allFinite())
            throw Error(ErrorKind::Numerical, "non-finite state in Hamiltonian integration");
        traj.points[k + 1] = q;
        traj.momenta[k + 1] = p;
    }
    for (int k = 0; k <= steps; ++k)
        traj.velocities[k] = chart.inverse_metric(traj.points[k]) * traj.momenta[k];
    traj.energy = hamiltonian(chart, q0, p0);
    traj.start = q0;
    traj.end = traj.points.back();
    return traj;
}

namespace {

// Damped Newton on F(x) = 0 with a forward-difference Jacobian.
template <class Residual>
Vec damped_newton(Residual&& residual, Vec x, double tol, int max_iter, double& final_norm) {
    Vec r = residual(x);
    double norm = r.norm();
    for (int it = 0; it < max_iter && norm > tol; ++it) {
        const int m = static_cast<int>(x.size());
        Mat jac(r.size(), m);
        for (int j = 0; j < m; ++j) {
            const double h = 1e-7 * (1.0 + std::abs(x[j]));
            Vec xp = x;
            xp[j] += h;
            jac.col(j) = (residual(xp) - r) / h;
        }
        const Vec step = jac.completeOrthogonalDecomposition().solve(-r);
        if (!step.allFinite()) break;
        double lambda = 1.0;
        bool improved = false;
        for (int halvings = 0; halvings < 30; ++halvings, lambda *= 0.5) {
            const Vec trial = x + lambda * step;
            Vec rt;
            try {
                rt = residual(trial);
            } catch (const Error&) {
                continue;
            }
            if (rt.allFinite() && rt.norm() < norm) {
                x = trial;
                r = rt;
                norm = rt.norm();
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    final_norm = norm;
    return x;
}

void check_drift(const MetricChart& chart, const ClassicalTrajectory& traj, double tol) {
    const double drift = traj.max_energy_drift(chart);
    if (drift > tol * (1.0 + std::abs(traj.energy))) {
        std::ostringstream os;
        os << "energy drift " << drift << " exceeds tolerance; use a finer grid (more steps)";
        throw Error(ErrorKind::StepSize, os.str());
    }
}

}  // namespace

ClassicalTrajectory solve_classical_trajectory(const MetricChart& chart, const Vec& start,
                                               const Vec& end, double duration,
                                               const TrajectoryOptions& options) {
    const int n = chart.dim();
    if (start.size() != n || end.size() != n)
        throw Error(ErrorKind::Shape, "endpoint dimension does not match chart");
    if (!(duration > 0.0)) throw Error(ErrorKind::Domain, "duration must be positive");
    if (options.steps < 16) throw Error(ErrorKind::Domain, "grid resolution must be at least 16 steps");

    Vec seed = options.momentum_seed ? *options.momentum_seed
                                     : Vec(chart.metric(start) * (end - start) / duration);
    if (seed.size() != n) throw Error(ErrorKind::Shape, "momentum seed dimension mismatch");

    ClassicalTrajectory traj;
    double residual_norm = 0.0;
    if (options.solver == TrajectorySolver::Shooting) {
        auto residual = [&](const Vec& p0) -> Vec {
            return integrate_hamiltonian(chart, start, p0, duration, options.steps).points.back() - end;
        };
        const Vec p0 = damped_newton(residual, seed, options.bvp_tol, options.max_iter, residual_norm);
        if (!(residual_norm <= options.bvp_tol)) {
            std::ostringstream os;
            os << "shooting did not converge in " << options.max_iter << " iterations, residual "
               << residual_norm;
            throw Error(ErrorKind::NoTrajectory, os.str());
        }
        traj = integrate_hamiltonian(chart, start, p0, duration, options.steps);
    } else {
        if (!options.target_energy)
            throw Error(ErrorKind::Domain, "fixed-energy solver needs a target energy");
        const double energy = *options.target_energy;
        auto residual = [&](const Vec& x) -> Vec {
            const double t_end = x[n];
            if (!(t_end > 0.0)) throw Error(ErrorKind::Domain, "non-positive travel time");
            Vec r(n + 1);
            const Vec p0 = x.head(n);
            r.head(n) = integrate_hamiltonian(chart, start, p0, t_end, options.steps).points.back() - end;
            r[n] = hamiltonian(chart, start, p0) - energy;
            return r;
        };
        Vec x0(n + 1);
        x0.head(n) = seed;
        x0[n] = duration;
        const Vec x = damped_newton(residual, x0, options.bvp_tol, options.max_iter, residual_norm);
        if (!(residual_norm <= options.bvp_tol)) {
            std::ostringstream os;
            os << "fixed-energy shooting did not converge, residual " << residual_norm;
            throw Error(ErrorKind::NoTrajectory, os.str());
        }
        traj = integrate_hamiltonian(chart, start, x.head(n), x[n], options.steps);
    }
    traj.points.back() = end;
    traj.end = end;
    traj.start = start;
    if (options.check_energy_drift) check_drift(chart, traj, options.energy_drift_tol);
    return traj;
}

Mat g_orthonormalize(const MetricChart& chart, const Vec& q, const Mat& candidates) {
    const int n = chart.dim();
    const Mat g = chart.metric(q);
    Mat basis(n, n);
    int filled = 0;
    for (int c = 0; c < candidates.cols() && filled < n; ++c) {
        Vec v = candidates.col(c);
        // Two passes of modified Gram-Schmidt.
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < filled; ++j) v -= basis.col(j).dot(g * v) * basis.col(j);
        const double norm = std::sqrt(std::max(0.0, v.dot(g * v)));
        const double ref = std::sqrt(std::max(0.0, Vec(candidates.col(c)).dot(g * candidates.col(c))));
        if (norm <= 1e-10 * std::max(ref, 1e-300)) continue;
        basis.col(filled++) = v / norm;
    }
    if (filled < n) throw Error(ErrorKind::DegenerateMetric, "could not build a full g-orthonormal frame");
    return basis;
}

std::vector<int> Frame::normal_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < dim(); ++i)
        if (i != tangent_index) idx.push_back(i);
    return idx;
}

double Frame::max_orthonormality_error(const MetricChart& chart, const ClassicalTrajectory& traj) const {
    double err = 0.0;
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        const Mat gram = vectors[k].transpose() * chart.metric(traj.points[k]) * vectors[k];
        err = std::max(err, (gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
    }
    return err;
}

double Frame::max_connection() const {
    double m = 0.0;
    for (const auto& c : connection) m = std::max(m, c.cwiseAbs().maxCoeff());
    return m;
}

namespace {

// Cubic Hermite interpolation of the trajectory inside [t_k, t_k+1].
void hermite(const ClassicalTrajectory& traj, std::size_t k, double s, Vec& q, Vec& qdot) {
    const double h = traj.grid.dt(k);
    const double u = s;  // local parameter in [0, 1]
    const double h00 = 2 * u * u * u - 3 * u * u + 1;
    const double h10 = u * u * u - 2 * u * u + u;
    const double h01 = -2 * u * u * u + 3 * u * u;
    const double h11 = u * u * u - u * u;
    const double d00 = 6 * u * u - 6 * u;
    const double d10 = 3 * u * u - 4 * u + 1;
    const double d01 = -6 * u * u + 6 * u;
    const double d11 = 3 * u * u - 2 * u;
    const Vec& q0 = traj.points[k];
    const Vec& q1 = traj.points[k + 1];
    const Vec& v0 = traj.velocities[k];
    const Vec& v1 = traj.velocities[k + 1];
    q = h00 * q0 + h10 * h * v0 + h01 * q1 + h11 * h * v1;
    qdot = (d00 * q0 + d10 * h * v0 + d01 * q1 + d11 * h * v1) / h;
}

}  // namespace

Frame parallel_frame(const MetricChart& chart, const ClassicalTrajectory& traj,
                     const FrameOptions& options) {
    const int n = chart.dim();
    const std::size_t nodes = traj.points.size();
    if (nodes < 2 || traj.velocities.size() != nodes) throw Error(ErrorKind::Shape, "invalid trajectory grid");
    traj.grid.validate();
    const double frame_tol = options.frame_tol >= 0.0 ? options.frame_tol : (chart.is_flat() ? 1e-8 : 1e-6);

    // First candidate is the unit tangent at t0, or the first axis if the
    // trajectory starts at rest; remaining candidates are coordinate axes.
    Mat candidates(n, n + 1);
    const bool at_rest = chart.norm(traj.points[0], traj.velocities[0]) < options.v_tol;
    candidates.col(0) = at_rest ? Vec(Vec::Unit(n, 0)) : traj.velocities[0];
    candidates.rightCols(n) = Mat::Identity(n, n);

    Frame frame;
    frame.tangent_index = 0;
    frame.vectors.resize(nodes);
    frame.connection.assign(nodes, Mat::Zero(n, n));
    Mat e = g_orthonormalize(chart, traj.points[0], candidates);
    frame.vectors[0] = e;

    if (chart.is_flat()) {
        for (std::size_t k = 1; k < nodes; ++k) frame.vectors[k] = e;
        return frame;
    }

    auto rhs = [&](const Vec& q, const Vec& qdot, const Mat& m) -> Mat {
        return -christoffel(chart, q).contract(qdot) * m;
    };
    const int sub = std::max(1, options.substeps);
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
        const double h = traj.grid.dt(k) / sub;
        for (int s = 0; s < sub; ++s) {
            const double u0 = static_cast<double>(s) / sub;
            const double uh = (s + 0.5) / sub;
            const double u1 = static_cast<double>(s + 1) / sub;
            Vec qa, va, qb, vb, qc, vc;
            hermite(traj, k, u0, qa, va);
            hermite(traj, k, uh, qb, vb);
            hermite(traj, k, u1, qc, vc);
            const Mat k1 = rhs(qa, va, e);
            const Mat k2 = rhs(qb, vb, e + 0.5 * h * k1);
            const Mat k3 = rhs(qb, vb, e + 0.5 * h * k2);
            const Mat k4 = rhs(qc, vc, e + h * k3);
            e += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!e.allFinite()) throw Error(ErrorKind::FrameIntegration, "non-finite frame");
        if ((k + 1) % static_cast<std::size_t>(std::max(1, options.reortho_every)) == 0 || k + 2 == nodes)
            e = g_orthonormalize(chart, traj.points[k + 1], e);
        frame.vectors[k + 1] = e;
    }

    // Omega_ij = g(nabla_t E_i, E_j), nabla_t E = dE/dt + Gamma(qdot) E.
    for (std::size_t k = 0; k < nodes; ++k) {
        Mat de;
        if (k == 0) {
            de = (frame.vectors[1] - frame.vectors[0]) / traj.grid.dt(0);
        } else if (k + 1 == nodes) {
            de = (frame.vectors[k] - frame.vectors[k - 1]) / traj.grid.dt(k - 1);
        } else {
            de = (frame.vectors[k + 1] - frame.vectors[k - 1]) / (traj.grid.t[k + 1] - traj.grid.t[k - 1]);
        }
        const Mat cov = de + christoffel(chart, traj.points[k]).contract(traj.velocities[k]) * frame.vectors[k];
        frame.connection[k] = cov.transpose() * chart.metric(traj.points[k]) * frame.vectors[k];
    }

    const double err = frame.max_orthonormality_error(chart, traj);
    if (err > frame_tol) {
        std::ostringstream os;
        os << "frame orthonormality error " << err << " above tolerance " << frame_tol;
        throw Error(ErrorKind::FrameIntegration, os.str());
    }
    return frame;
}

namespace {

struct GeodesicState {
    Vec q;
    Vec v;
};

GeodesicState geodesic_rhs(const MetricChart& chart, const GeodesicState& s) {
    return {s.v, -christoffel(chart, s.q).apply(s.v, s.v)};
}

Vec integrate_geodesic(const MetricChart& chart, const Vec& base, const Vec& v, int steps) {
    GeodesicState s{base, v};
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        const auto k1 = geodesic_rhs(chart, s);
        const auto k2 = geodesic_rhs(chart, {s.q + 0.5 * h * k1.q, s.v + 0.5 * h * k1.v});
        const auto k3 = geodesic_rhs(chart, {s.q + 0.5 * h * k2.q, s.v + 0.5 * h * k2.v});
        const auto k4 = geodesic_rhs(chart, {s.q + h * k3.q, s.v + h * k3.v});
        s.q += h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
        s.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    }
    if (!s.q.allFinite()) throw Error(ErrorKind::OutOfChart, "geodesic left the chart");
    return s.q;
}

}  // namespace

Vec exp_map(const MetricChart& chart, const Vec& base, const Vec& v, const ExpOptions& options) {
    if (base.size() != chart.dim() || v.size() != chart.dim())
        throw Error(ErrorKind::Shape, "exp_map dimension mismatch");
    if (chart.is_flat()) return base + v;
    if (!(chart.norm(base, v) < chart.injectivity_radius()))
        throw Error(ErrorKind::OutOfChart, "tangent vector beyond the injectivity guard");
    return integrate_geodesic(chart, base, v, options.steps);
}

Vec log_map(const MetricChart& chart, const Vec& base, const Vec& target, const ExpOptions& options) {
    if (base.size() != chart.dim() || target.size() != chart.dim())
        throw Error(ErrorKind::Shape, "log_map dimension mismatch");
    if (chart.is_flat()) return target - base;
    auto residual = [&](const Vec& v) -> Vec { return exp_map(chart, base, v, options) - target; };
    double norm = 0.0;
    const double tol = options.newton_tol * (1.0 + target.norm());
    const Vec v = damped_newton(residual, Vec(target - base), tol, options.max_iter, norm);
    if (!(norm <= tol)) throw Error(ErrorKind::OutOfChart, "log_map shooting did not converge");
    return v;
}

}  // namespace tubepi

#include "tubepi/oracles.hpp"

#include "tubepi/errors.hpp"

#include <cmath>
#include <numbers>

namespace tubepi {

double heat_kernel(const Vec& x, const Vec& y, double T, double sigma) {
    if (!(T > 0.0) || !(sigma > 0.0)) throw Error(ErrorKind::Domain, "heat kernel needs T > 0 and sigma > 0");
    if (x.size() != y.size()) throw Error(ErrorKind::Shape, "heat kernel endpoints differ in dimension");
    const double v = sigma * sigma * T;
    const double n = static_cast<double>(x.size());
    return std::pow(2.0 * std::numbers::pi * v, -0.5 * n) * std::exp(-(x - y).squaredNorm() / (2.0 * v));
}

double heat_kernel(double x, double y, double T, double sigma) {
    return heat_kernel(Vec::Constant(1, x), Vec::Constant(1, y), T, sigma);
}

double mehler_kernel(double x, double y, double T, double omega, double hbar) {
    if (!(omega > 0.0) || !(T > 0.0) || !(hbar > 0.0))
        throw Error(ErrorKind::Domain, "Mehler kernel needs omega, T, hbar > 0");
    const double wt = omega * T;
    if (wt > 30.0) throw Error(ErrorKind::Range, "omega T = " + std::to_string(wt) + " overflows the Mehler kernel");
    const double sh = std::sinh(wt);
    const double ch = std::cosh(wt);
    const double pref = std::sqrt(omega / (2.0 * std::numbers::pi * hbar * sh));
    return pref * std::exp(-(omega / (2.0 * hbar * sh)) * ((x * x + y * y) * ch - 2.0 * x * y));
}

double mehler_kernel(const Vec& x, const Vec& y, double T, double omega, double hbar) {
    if (x.size() != y.size()) throw Error(ErrorKind::Shape, "Mehler kernel endpoints differ in dimension");
    double k = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) k *= mehler_kernel(x[i], y[i], T, omega, hbar);
    return k;
}

void PDEGrid::validate() const {
    if (!(half_width > 0.0)) throw Error(ErrorKind::Domain, "PDE half width must be positive");
    if (intervals < 64) throw Error(ErrorKind::Domain, "PDE grid needs at least 64 intervals");
    if (time_steps < 1) throw Error(ErrorKind::Domain, "PDE needs at least one time step");
    if (!(duration > 0.0)) throw Error(ErrorKind::Domain, "PDE duration must be positive");
    if (!(sigma > 0.0)) throw Error(ErrorKind::Domain, "PDE sigma must be positive");
    if (smoothing_steps < 0 || smoothing_steps % 2 != 0 || smoothing_steps / 2 > time_steps)
        throw Error(ErrorKind::Domain, "smoothing steps must be even and fit in the time steps");
}

namespace {

// Tridiagonal rows of the spatial operator L u = b u_x + sigma^2/2 u_xx - theta V u at time t.
struct Operator {
    std::vector<Complex> lower, diag, upper;
};

Operator assemble(const PDEGrid& g, double t) {
    const int J = g.intervals;
    const double dx = g.dx();
    const double diff = 0.5 * g.sigma * g.sigma / (dx * dx);
    Operator op;
    op.lower.assign(J + 1, 0.0);
    op.diag.assign(J + 1, 0.0);
    op.upper.assign(J + 1, 0.0);
    for (int j = 0; j <= J; ++j) {
        const double x = g.x(j);
        const double v = g.potential ? g.potential(t, x) : 0.0;
        if (std::abs(v) * g.dt() > 0.5)
            throw Error(ErrorKind::StepSize, "dt max|V_E| exceeds the stability budget 0.5");
        const double b = g.drift ? g.drift(t, x) : 0.0;
        op.diag[j] = -2.0 * diff - g.theta * v;
        op.lower[j] = diff - b / (2.0 * dx);
        op.upper[j] = diff + b / (2.0 * dx);
    }
    if (g.boundary == BoundaryCondition::Reflecting) {
        op.lower[0] = 0.0;
        op.upper[0] = 2.0 * diff;
        op.upper[J] = 0.0;
        op.lower[J] = 2.0 * diff;
    }
    return op;
}

// One step (I - beta h L_new) u_new = (I + (1 - beta) h L_old) u_old.
void advance(const PDEGrid& g, std::vector<Complex>& u, const Operator& old_op, const Operator& new_op, double h,
             double beta) {
    const int J = g.intervals;
    const bool dirichlet = g.boundary == BoundaryCondition::DirichletZero;
    const int lo = dirichlet ? 1 : 0;
    const int hi = dirichlet ? J - 1 : J;
    const int m = hi - lo + 1;
    std::vector<Complex> a(m), d(m), c(m), r(m);
    const double ex = (1.0 - beta) * h;
    for (int j = lo; j <= hi; ++j) {
        Complex rhs = u[j] + ex * old_op.diag[j] * u[j];
        if (j > 0) rhs += ex * old_op.lower[j] * u[j - 1];
        if (j < J) rhs += ex * old_op.upper[j] * u[j + 1];
        const int i = j - lo;
        r[i] = rhs;
        a[i] = -beta * h * new_op.lower[j];
        d[i] = 1.0 - beta * h * new_op.diag[j];
        c[i] = -beta * h * new_op.upper[j];
    }
    // Thomas algorithm; boundary values are zero in the Dirichlet case.
    for (int i = 1; i < m; ++i) {
        const Complex w = a[i] / d[i - 1];
        d[i] -= w * c[i - 1];
        r[i] -= w * r[i - 1];
    }
    std::vector<Complex> x(m);
    x[m - 1] = r[m - 1] / d[m - 1];
    for (int i = m - 2; i >= 0; --i) x[i] = (r[i] - c[i] * x[i + 1]) / d[i];
    for (int i = 0; i < m; ++i) u[i + lo] = x[i];
    if (dirichlet) {
        u[0] = 0.0;
        u[J] = 0.0;
    }
}

}  // namespace

std::vector<Complex> solve_backward_pde(const PDEGrid& grid, const std::function<Complex(double)>& terminal) {
    grid.validate();
    const int J = grid.intervals;
    std::vector<Complex> u(J + 1);
    for (int j = 0; j <= J; ++j) u[j] = terminal(grid.x(j));
    if (grid.boundary == BoundaryCondition::DirichletZero) {
        u[0] = 0.0;
        u[J] = 0.0;
    }
    const double T = grid.duration;
    const double h = grid.dt();
    // tau = T - t runs forward from 0.
    double tau = 0.0;
    Operator current = assemble(grid, T);
    for (int s = 0; s < grid.smoothing_steps; ++s) {
        const double next = tau + 0.5 * h;
        Operator op = assemble(grid, T - next);
        advance(grid, u, current, op, 0.5 * h, 1.0);
        current = std::move(op);
        tau = next;
    }
    for (int n = grid.smoothing_steps / 2; n < grid.time_steps; ++n) {
        const double next = (n + 1) * h;
        Operator op = assemble(grid, T - next);
        advance(grid, u, current, op, h, 0.5);
        current = std::move(op);
        tau = next;
    }
    return u;
}

Complex interpolate(const PDEGrid& grid, const std::vector<Complex>& values, double x) {
    if (values.size() != static_cast<std::size_t>(grid.intervals + 1))
        throw Error(ErrorKind::Shape, "grid values have the wrong length");
    if (x < -grid.half_width || x > grid.half_width) throw Error(ErrorKind::Domain, "point outside the PDE grid");
    const double s = (x + grid.half_width) / grid.dx();
    const int j = std::min(grid.intervals - 1, static_cast<int>(std::floor(s)));
    const double f = s - j;
    return (1.0 - f) * values[j] + f * values[j + 1];
}

Complex pde_bridge_expectation(double x, double y, double T, Complex theta, const std::function<double(double)>& v_e,
                               double sigma, int intervals, int time_steps, double terminal_width) {
    if (!(terminal_width > 0.0) || !(terminal_width < T))
        throw Error(ErrorKind::Domain, "terminal width must lie in (0, T)");
    PDEGrid g;
    g.half_width = std::max(6.0, std::max(std::abs(x), std::abs(y)) + 8.0 * sigma * std::sqrt(T));
    g.intervals = intervals;
    g.time_steps = time_steps;
    g.duration = T - terminal_width;
    g.sigma = sigma;
    g.theta = theta;
    g.potential = [&v_e](double, double z) { return v_e(z); };
    g.boundary = BoundaryCondition::DirichletZero;
    const double eps = terminal_width;
    const double vy = v_e(y);
    const auto u = solve_backward_pde(g, [&](double z) -> Complex {
        return heat_kernel(z, y, eps, sigma) * std::exp(-theta * (0.5 * eps * (v_e(z) + vy)));
    });
    return interpolate(g, u, x) / heat_kernel(x, y, T, sigma);
}

LatticeSum lattice_path_sum(const LatticeInstance& inst, Signature mode) {
    const int J = inst.sites;
    const int K = inst.steps;
    if (J > 7 || K > 6) throw Error(ErrorKind::Size, "lattice instance limited to J <= 7 sites and K <= 6 steps");
    if (J < 2 || K < 1) throw Error(ErrorKind::Domain, "lattice needs at least 2 sites and 1 step");
    if (inst.start_site < 0 || inst.start_site >= J || inst.end_site < 0 || inst.end_site >= J)
        throw Error(ErrorKind::Domain, "endpoint site out of range");
    if (!(inst.half_width > 0.0) || !(inst.duration > 0.0) || !(inst.sigma > 0.0))
        throw Error(ErrorKind::Domain, "lattice geometry must be positive");
    const double dt = inst.duration / K;
    std::vector<double> xs(J);
    for (int i = 0; i < J; ++i) xs[i] = -inst.half_width + 2.0 * inst.half_width * i / (J - 1);

    Eigen::MatrixXcd G(J, J), M(J, J);
    std::vector<Complex> w(J);
    for (int i = 0; i < J; ++i) {
        const double v = inst.potential ? inst.potential(xs[i]) : 0.0;
        w[i] = mode == Signature::Euclidean ? Complex(std::exp(-v * dt), 0.0) : std::polar(1.0, v * dt);
    }
    for (int i = 0; i < J; ++i)
        for (int j = 0; j < J; ++j) {
            G(i, j) = heat_kernel(xs[i], xs[j], dt, inst.sigma);
            M(i, j) = G(i, j) * w[i];
        }

    // Brute force over every assignment of the K - 1 interior sites.
    Complex raw{0.0, 0.0};
    double free_raw = 0.0;
    std::vector<int> path(K + 1, 0);
    path[0] = inst.start_site;
    path[K] = inst.end_site;
    long long total = 1;
    for (int k = 1; k < K; ++k) total *= J;
    for (long long code = 0; code < total; ++code) {
        long long c = code;
        for (int k = 1; k < K; ++k) {
            path[k] = static_cast<int>(c % J);
            c /= J;
        }
        Complex weight{1.0, 0.0};
        double free_weight = 1.0;
        for (int k = 0; k < K; ++k) {
            const double g = G(path[k], path[k + 1]).real();
            weight *= g * w[path[k]];
            free_weight *= g;
        }
        raw += weight;
        free_raw += free_weight;
    }

    Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(J, J);
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Identity(J, J);
    for (int k = 0; k < K; ++k) {
        P = P * M;
        F = F * G;
    }
    LatticeSum out;
    out.raw_brute_force = raw;
    out.raw_transfer_matrix = P(inst.start_site, inst.end_site);
    out.free_kernel = F(inst.start_site, inst.end_site).real();
    out.brute_force = raw / free_raw;
    out.transfer_matrix = out.raw_transfer_matrix / out.free_kernel;
    if (std::abs(out.brute_force - out.transfer_matrix) > 1e-12 * std::max(1.0, std::abs(out.transfer_matrix)))
        throw Error(ErrorKind::Numerical, "lattice brute force disagrees with the transfer-matrix product");
    return out;
}

}  // namespace tubepi

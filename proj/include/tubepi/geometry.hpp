#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace tubepi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ScalarField = std::function<double(const Vec&)>;
using VectorField = std::function<Vec(const Vec&)>;
using MetricField = std::function<Mat(const Vec&)>;

enum class MetricKind { Flat, UserSupplied };

// Single global coordinate chart on R^n carrying the metric g_ij(q) and the
// potential V(q). Flat charts never call the metric function.
class MetricChart {
public:
    static MetricChart flat(int dim, ScalarField potential, VectorField potential_gradient = {});
    static MetricChart user(int dim, MetricField metric, ScalarField potential,
                            VectorField potential_gradient = {},
                            double injectivity_radius = std::numeric_limits<double>::infinity());

    int dim() const { return dim_; }
    MetricKind kind() const { return kind_; }
    bool is_flat() const { return kind_ == MetricKind::Flat; }
    double injectivity_radius() const { return injectivity_radius_; }

    Mat metric(const Vec& q) const;
    // Throws DegenerateMetric when g(q) is not invertible.
    Mat inverse_metric(const Vec& q) const;
    double potential(const Vec& q) const { return potential_(q); }
    // Analytic when supplied, central differences otherwise.
    Vec potential_gradient(const Vec& q) const;
    bool has_analytic_gradient() const { return static_cast<bool>(potential_gradient_); }

    double norm(const Vec& q, const Vec& v) const;
    double inner(const Vec& q, const Vec& u, const Vec& v) const;

    // Smallest eigenvalue of g(q); used to check positive-definiteness.
    double min_eigenvalue(const Vec& q) const;

private:
    MetricChart() = default;

    int dim_ = 0;
    MetricKind kind_ = MetricKind::Flat;
    MetricField metric_;
    ScalarField potential_;
    VectorField potential_gradient_;
    double injectivity_radius_ = std::numeric_limits<double>::infinity();
};

// Componentwise finite-difference step 1e-5 (1 + |q_l|).
double fd_step(double q);

// Gamma^k_ij stored as one n x n matrix per upper index k.
struct Christoffel {
    std::vector<Mat> upper;

    double operator()(int k, int i, int j) const { return upper[k](i, j); }
    // Matrix A with A(k, j) = Gamma^k_ij v^i, so that (A w)^k = Gamma^k_ij v^i w^j.
    Mat contract(const Vec& v) const;
    // Vector Gamma^k_ij v^i w^j.
    Vec apply(const Vec& v, const Vec& w) const;
};

Christoffel christoffel(const MetricChart& chart, const Vec& q);

double hamiltonian(const MetricChart& chart, const Vec& q, const Vec& p);

struct TimeGrid {
    std::vector<double> t;

    static TimeGrid uniform(double T, int steps);

    std::size_t nodes() const { return t.size(); }
    int steps() const { return static_cast<int>(t.size()) - 1; }
    double duration() const { return t.back() - t.front(); }
    double dt(std::size_t k) const { return t[k + 1] - t[k]; }
    // Throws Shape unless strictly increasing with at least two nodes.
    void validate() const;
};

struct ClassicalTrajectory {
    TimeGrid grid;
    std::vector<Vec> points;
    std::vector<Vec> velocities;
    std::vector<Vec> momenta;
    double energy = 0.0;
    Vec start;
    Vec end;

    int dim() const { return static_cast<int>(start.size()); }
    double duration() const { return grid.duration(); }
    double max_energy_drift(const MetricChart& chart) const;
};

enum class TrajectorySolver { Shooting, FixedEnergy };

struct TrajectoryOptions {
    TrajectorySolver solver = TrajectorySolver::Shooting;
    int steps = 256;
    double bvp_tol = 1e-10;
    int max_iter = 60;
    double energy_drift_tol = 1e-6;
    // Initial-momentum seed; defaults to g(A)(B - A)/T. Picks the branch when
    // the boundary-value problem has several solutions.
    std::optional<Vec> momentum_seed;
    // FixedEnergy only: the energy shell to hit. The travel time becomes an
    // unknown and the supplied T is its initial guess.
    std::optional<double> target_energy;
    bool check_energy_drift = true;
};

ClassicalTrajectory solve_classical_trajectory(const MetricChart& chart, const Vec& start,
                                               const Vec& end, double duration,
                                               const TrajectoryOptions& options = {});

// Integrates Hamilton's equations from (q0, p0) over a uniform grid with RK4.
ClassicalTrajectory integrate_hamiltonian(const MetricChart& chart, const Vec& q0, const Vec& p0,
                                          double duration, int steps);

struct Frame {
    // vectors[k].col(i) = E_i(t_k).
    std::vector<Mat> vectors;
    int tangent_index = 0;
    // connection[k](i, j) = g(nabla_t E_i, E_j) at t_k.
    std::vector<Mat> connection;

    std::size_t nodes() const { return vectors.size(); }
    int dim() const { return vectors.empty() ? 0 : static_cast<int>(vectors.front().rows()); }
    // Column indices other than the tangent one.
    std::vector<int> normal_indices() const;
    double max_orthonormality_error(const MetricChart& chart, const ClassicalTrajectory& traj) const;
    double max_connection() const;
};

struct FrameOptions {
    int reortho_every = 8;
    double frame_tol = -1.0;  // < 0: 1e-8 flat, 1e-6 curved
    double v_tol = 1e-10;
    // Sub-steps of RK4 between consecutive grid nodes.
    int substeps = 1;
};

Frame parallel_frame(const MetricChart& chart, const ClassicalTrajectory& traj,
                     const FrameOptions& options = {});

// Gram-Schmidt in the g(q) inner product; columns kept in order, near-dependent
// columns are skipped. Returns exactly `dim` columns or throws DegenerateMetric.
Mat g_orthonormalize(const MetricChart& chart, const Vec& q, const Mat& candidates);

struct ExpOptions {
    int steps = 64;
    double newton_tol = 1e-13;
    int max_iter = 50;
};

Vec exp_map(const MetricChart& chart, const Vec& base, const Vec& v, const ExpOptions& options = {});
Vec log_map(const MetricChart& chart, const Vec& base, const Vec& target,
            const ExpOptions& options = {});

}  // namespace tubepi

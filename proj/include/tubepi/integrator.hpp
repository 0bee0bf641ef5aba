#pragma once

#include "tubepi/accumulator.hpp"
#include "tubepi/ensemble.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace tubepi {

enum class ObservableKind { Endpoint, PathFunctional, Fiber };

// Bounded observable; every evaluation is checked against the declared bound.
class Observable {
public:
    static Observable constant(Complex c);
    static Observable endpoint(std::function<Complex(const Vec&)> f, double bound);
    static Observable path_functional(std::function<Complex(const DiscretePath&)> f, double bound);
    static Observable fiber(std::function<Complex(const Vec&, double)> f, double bound);

    ObservableKind kind() const { return kind_; }
    double bound() const { return bound_; }

    // Endpoint: f(X_T). Path functional: F(X). Fiber observables need a time.
    Complex operator()(const DiscretePath& path) const;
    Complex operator()(const Vec& x, double t) const;

private:
    Complex checked(Complex v) const;

    ObservableKind kind_ = ObservableKind::Endpoint;
    std::function<Complex(const Vec&)> endpoint_;
    std::function<Complex(const DiscretePath&)> functional_;
    std::function<Complex(const Vec&, double)> fiber_;
    double bound_ = 0.0;
};

struct PartitionSpec {
    std::vector<double> nodes;

    // `intervals` equal pieces of [t_0, T]; must divide the grid evenly to nest.
    static PartitionSpec uniform(const TimeGrid& grid, int intervals);
    double mesh() const;
    // Grid index of every partition node; throws Partition if not nested.
    std::vector<std::size_t> grid_indices(const TimeGrid& grid) const;
};

// Which action enters the weight: the potential channel V/hbar (diffusion
// carries the kinetic part) or the full Lagrangian density.
enum class ActionChannel { PotentialOnly, FullDensity };

// potential_only: V(X_k)/hbar. Otherwise (1/2 g qdot.qdot + V)/hbar with
// central-difference velocities.
std::vector<double> euclidean_density(const MetricChart& chart, const DiscretePath& path, bool potential_only,
                                      double hbar = 1.0);

// Trapezoid sum of grid densities.
double trapezoid(const TimeGrid& grid, const std::vector<double>& density);
// Left-point Riemann sum over the partition nodes.
double left_riemann(const TimeGrid& grid, const std::vector<double>& density,
                    const std::vector<std::size_t>& partition_indices);

// exp(log_girsanov) for bridge-law ensembles (1 for drifted ones), times the
// tube indicator when confinement is active.
double importance_weight(const Ensemble& ensemble, const FluctuationPath& fluct);

KernelEstimate stochastic_path_integral(const Ensemble& ensemble, const Observable& observable, Signature mode,
                                        ActionChannel channel = ActionChannel::PotentialOnly);

struct RiemannProductResult {
    KernelEstimate product;    // I_p
    KernelEstimate integral;   // I_mu on the same samples
    double mean_abs_gap = 0.0; // E[w |O| |S - S_p|]
    double gap_std_error = 0.0;
};

RiemannProductResult riemann_product(const Ensemble& ensemble, const PartitionSpec& partition,
                                     const Observable& observable, Signature mode,
                                     ActionChannel channel = ActionChannel::PotentialOnly);

struct FeynmanKacResult {
    KernelEstimate estimate;
    double sup_density = 0.0;  // C
    double duration = 0.0;     // T
};

// sup |V_E| over the ensemble, inflated by 10%.
double estimate_density_bound(const Ensemble& ensemble);

FeynmanKacResult feynman_kac_expectation(const Ensemble& ensemble, const Observable& f, Complex theta,
                                         std::optional<double> density_bound = std::nullopt);

struct ThetaSeries {
    std::vector<Complex> coefficients;   // a_n
    std::vector<double> std_errors;      // SE of each a_n
    double sup_density = 0.0;
    double duration = 0.0;
    double observable_bound = 0.0;

    int order() const { return static_cast<int>(coefficients.size()) - 1; }
    // sum_n a_n (-theta)^n / n!
    Complex evaluate(Complex theta) const;
    // M_f (|theta| C T)^(N+1) / (N+1)! e^{|theta| C T}
    double remainder_bound(Complex theta) const;
    // M_f (C T)^n
    double coefficient_bound(int n) const;
    bool coefficient_within_bound(int n) const;
};

ThetaSeries theta_series(const Ensemble& ensemble, const Observable& f, int order,
                         std::optional<double> density_bound = std::nullopt);

// u_theta at theta = -i; also checks it against the lorentzian potential-channel
// path integral on the same samples.
KernelEstimate lorentzian_from_theta(const Ensemble& ensemble, const Observable& f,
                                     std::optional<double> density_bound = std::nullopt);

struct DisintegrationResult {
    Complex lhs;
    Complex rhs;
    double gap = 0.0;  // |lhs - rhs|
    double lhs_std_error = 0.0;
    double rhs_std_error = 0.0;
    double combined_std_error = 0.0;
};

// time_weights is a probability vector over the grid nodes. The left side
// draws one time per sample from the weights (stream channel 3 of the
// ensemble seed); the right side averages every node with its weight.
DisintegrationResult disintegration_check(const Ensemble& ensemble, const Observable& observable,
                                          const std::vector<double>& time_weights);

struct PropagatorOptions {
    double duration = 1.0;
    double hbar = 1.0;
    std::uint64_t seed = 0;
    std::size_t samples = 1000;
    int workers = 1;
    Signature mode = Signature::Euclidean;
    std::optional<double> radius;
    double coercivity = 1.0;
    // Partial estimates over consecutive runs of this many samples (0: none).
    std::size_t chunk_size = 0;
    TrajectoryOptions trajectory;
};

struct PropagatorResult {
    KernelEstimate estimate;     // kernel value
    KernelEstimate expectation;  // bridge expectation factor
    double free_kernel = 0.0;
    double in_tube_fraction = 1.0;
    std::vector<KernelEstimate> chunks;  // kernel-scaled partial estimates
};

// Euclidean: heat_kernel(x, y, T) E_bridge[exp(-int V/hbar dt)] over bridges
// around the classical trajectory, shifted to the free bridge by the exact
// discrete Cameron-Martin weight. Lorentzian: the same with exp(+i int V/hbar).
PropagatorResult propagator(const MetricChart& chart, const SDEParams& params, const Vec& x, const Vec& y,
                            const PropagatorOptions& options);

}  // namespace tubepi

#pragma once

#include "tubepi/geometry.hpp"
#include "tubepi/rng.hpp"
#include "tubepi/tube.hpp"

#include <functional>
#include <vector>

namespace tubepi {

// Which law the emitted paths follow.
//  Drifted:    the drifted SDE driven by bridge noise (samples of mu).
//  Reweighted: plain pinned bridges (samples of Gamma); log_girsanov carries
//              log dmu/dGamma so expectations under mu are weighted means.
enum class SamplingLaw { Drifted, Reweighted };

struct SDEParams {
    double sigma = 1.0;
    double xi0 = 0.0;
    // Optional time profile; overrides xi0 when set.
    std::function<double(double)> xi;
    // Confinement is active iff barrier_strength > 0.
    double barrier_strength = 0.0;
    int barrier_power = 2;
    int steps = 128;
    int max_retries = 64;
    bool energy_cost = true;
    SamplingLaw law = SamplingLaw::Reweighted;
    double gauge_tol = 1e-12;

    double xi_at(double t) const { return xi ? xi(t) : xi0; }
    bool confined() const { return barrier_strength > 0.0; }
    void validate() const;
};

struct FluctuationPath {
    // normal_components[k] holds chi^i(t_k) for the frame's normal columns.
    std::vector<Vec> normal_components;
    // Gauge-fixed longitudinal coefficient along the unit tangent column.
    std::vector<double> longitudinal;
    // Amplitude along the gauge bump removed by gauge fixing (the orbit coordinate).
    double gauge_mode = 0.0;
    double log_girsanov = 0.0;
    double action_integral = 0.0;
    bool in_tube = true;

    std::size_t nodes() const { return longitudinal.size(); }
    double max_normal_norm() const;
};

// Per-step record of a simulation, for checking the Girsanov sum independently.
struct SimulationTrace {
    std::vector<Vec> increments;  // reference-law (bridge) noise increments
    std::vector<Vec> drifts;      // drift b at the left point
    std::vector<double> dts;      // effective variance per unit sigma^2 of each step
};

// W(t) = B(t) - (t/T) B(T) at the grid nodes, B a Wiener process with variance sigma^2 t.
std::vector<Vec> sample_brownian_bridge(int dim, const TimeGrid& grid, double sigma, RandomStream& stream);

// |H(gamma0(t), p0(t)) - H(exp(gamma0(t), v), p0(t))| at grid node k.
double energy_cost(const MetricChart& chart, const ClassicalTrajectory& gamma0, std::size_t node, const Vec& v);
// Same at an arbitrary time, interpolating gamma0 linearly between nodes.
double energy_cost(const MetricChart& chart, const ClassicalTrajectory& gamma0, double t, const Vec& v);

// U_conf(r) = kappa (r/R)^m / (1 - (r/R)^2) and its radial derivative.
double barrier_potential(double r, const TubeSpec& spec, const SDEParams& params);
double barrier_gradient(double r, const TubeSpec& spec, const SDEParams& params);

// Drift b = -(1/sigma^2) grad U for the normal coefficients chi at node k,
// U = 1/2 xi |chi|^2 + E_c + U_conf.
Vec fluctuation_drift(const MetricChart& chart, const Frame& frame, const TubeSpec& spec,
                      const SDEParams& params, std::size_t node, const Vec& chi, bool with_barrier);

FluctuationPath simulate_fluctuation(const MetricChart& chart, const Frame& frame, const TubeSpec& spec,
                                     const SDEParams& params, RandomStream& normal_stream,
                                     RandomStream& longitudinal_stream, SimulationTrace* trace = nullptr);

// (1/sigma) sum b_k . dB_k - 1/2 sum |b_k|^2 dt_k / sigma^2, left-point Ito sum.
double girsanov_log_weight(const std::vector<Vec>& increments, const std::vector<Vec>& drifts,
                           const std::vector<double>& dts, double sigma);
double girsanov_log_weight(const SimulationTrace& trace, double sigma);

struct GaugeFixed {
    std::vector<double> values;
    double gauge_mode = 0.0;
};

// Endpoint-vanishing bump 4 t (T - t) / T^2 on the grid.
std::vector<double> gauge_bump(const TimeGrid& grid);
// Trapezoid integral of grid samples.
double grid_integral(const TimeGrid& grid, const std::vector<double>& values);
// p <- p - (int p / int phi) phi, so int p dt = 0 and endpoints are untouched.
GaugeFixed gauge_fix_longitudinal(const TimeGrid& grid, const std::vector<double>& samples);

struct AssembleOptions {
    // Add the gauge-orbit coordinate back (integration over the gauge orbit).
    bool restore_gauge_orbit = false;
};

DiscretePath assemble_path(const MetricChart& chart, const ClassicalTrajectory& gamma0, const Frame& frame,
                           const FluctuationPath& fluct, const AssembleOptions& options = {});

// Frame coefficients u^i(t_k) = g(u(t_k), E_i(t_k)) of a vector field along gamma0.
std::vector<Vec> frame_coefficients(const MetricChart& chart, const ClassicalTrajectory& gamma0,
                                    const Frame& frame, const std::vector<Vec>& field);
// sqrt( int |u|^2 + |u'|^2 dt ) with Euclidean component norms.
double component_h1_norm(const TimeGrid& grid, const std::vector<Vec>& values);
// sqrt( int g(u,u) + g(nabla_t u, nabla_t u) dt ) along gamma0.
double covariant_h1_norm(const MetricChart& chart, const ClassicalTrajectory& gamma0,
                         const std::vector<Vec>& field);

}  // namespace tubepi

#pragma once

#include "tubepi/accumulator.hpp"
#include "tubepi/geometry.hpp"

#include <functional>
#include <vector>

namespace tubepi {

// (2 pi sigma^2 T)^(-n/2) exp(-|x - y|^2 / (2 sigma^2 T))
double heat_kernel(const Vec& x, const Vec& y, double T, double sigma = 1.0);
double heat_kernel(double x, double y, double T, double sigma = 1.0);

// Euclidean harmonic-oscillator kernel (unit mass). Throws Range for omega T > 30.
double mehler_kernel(double x, double y, double T, double omega, double hbar = 1.0);
// Isotropic product over components.
double mehler_kernel(const Vec& x, const Vec& y, double T, double omega, double hbar = 1.0);

enum class BoundaryCondition { DirichletZero, Reflecting };

struct PDEGrid {
    double half_width = 6.0;  // L
    int intervals = 1024;     // J
    int time_steps = 1000;
    double duration = 1.0;
    double sigma = 1.0;
    Complex theta{1.0, 0.0};
    // V_E(t, x)
    std::function<double(double, double)> potential;
    // Drift b(t, x) of the generator; zero when unset.
    std::function<double(double, double)> drift;
    BoundaryCondition boundary = BoundaryCondition::DirichletZero;
    // Implicit-Euler half steps taken first to damp rough terminal data.
    int smoothing_steps = 4;

    double dx() const { return 2.0 * half_width / intervals; }
    double dt() const { return duration / time_steps; }
    double x(int j) const { return -half_width + j * dx(); }
    void validate() const;
};

// Crank-Nicolson for d_t u + G_t u - theta V_E u = 0 backward from u(T) = f,
// G_t = b d_x + sigma^2/2 d_xx. Returns u(0, x_j) for j = 0..J.
std::vector<Complex> solve_backward_pde(const PDEGrid& grid, const std::function<Complex(double)>& terminal);

// Linear interpolation of grid values.
Complex interpolate(const PDEGrid& grid, const std::vector<Complex>& values, double x);

// E over the Brownian bridge x -> y (variance sigma^2) of exp(-theta int V_E dt),
// from the kernel of the backward equation divided by the free heat kernel.
// terminal_width is the variance time of the Gaussian standing in for delta_y.
Complex pde_bridge_expectation(double x, double y, double T, Complex theta, const std::function<double(double)>& v_e,
                               double sigma = 1.0, int intervals = 2048, int time_steps = 2000,
                               double terminal_width = 1e-3);

struct LatticeInstance {
    int sites = 5;           // J, nodes on [-half_width, half_width]
    int steps = 4;           // K
    double half_width = 2.0;
    double duration = 1.0;
    double sigma = 1.0;
    int start_site = 2;
    int end_site = 2;
    std::function<double(double)> potential;  // V_E(x)
};

struct LatticeSum {
    Complex brute_force;       // normalized by the free lattice kernel
    Complex transfer_matrix;   // same quantity by matrix products
    Complex raw_brute_force;
    Complex raw_transfer_matrix;
    double free_kernel = 0.0;
};

// Exhaustive sum over all pinned lattice paths with Gaussian transition
// weights and left-point exp(-sum V dt) (euclidean) or exp(+i sum V dt)
// (lorentzian). Throws Size for J > 7, K > 6.
LatticeSum lattice_path_sum(const LatticeInstance& instance, Signature mode);

}  // namespace tubepi

#include "doctest.h"

#include "tubepi/errors.hpp"
#include "tubepi/oracles.hpp"

#include <cmath>
#include <numbers>

using namespace tubepi;

TEST_CASE("heat kernel") {
    CHECK(heat_kernel(0.0, 0.0, 1.0) == doctest::Approx(0.3989422804).epsilon(1e-10));
    CHECK(heat_kernel(0.3, -1.1, 0.7, 1.3) == heat_kernel(-1.1, 0.3, 0.7, 1.3));
    double integral = 0.0;
    const double h = 1e-3;
    for (int j = -20000; j <= 20000; ++j) {
        const double w = (j == -20000 || j == 20000) ? 0.5 : 1.0;
        integral += w * h * heat_kernel(0.4, j * h, 0.8);
    }
    CHECK(std::abs(integral - 1.0) <= 1e-6);
    CHECK_THROWS_AS(heat_kernel(0.0, 0.0, 0.0), Error);
}

TEST_CASE("Mehler kernel") {
    CHECK(mehler_kernel(0.0, 0.0, 1.0, 1.0) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi * std::sinh(1.0))).epsilon(1e-14));
    CHECK(mehler_kernel(0.2, -0.7, 1.5, 0.8) == mehler_kernel(-0.7, 0.2, 1.5, 0.8));
    CHECK(std::abs(mehler_kernel(0.3, 0.9, 1.0, 1e-4) - heat_kernel(0.3, 0.9, 1.0)) <= 1e-6);
    try {
        mehler_kernel(0.0, 0.0, 31.0, 1.0);
        FAIL("expected a range error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Range);
    }
}

TEST_CASE("backward PDE spatially constant modes") {
    PDEGrid g;
    g.intervals = 64;
    g.time_steps = 40000;
    g.smoothing_steps = 0;
    g.half_width = 3.0;
    g.boundary = BoundaryCondition::Reflecting;
    g.potential = [](double, double) { return 1.0; };
    const auto u = solve_backward_pde(g, [](double) { return Complex(1.0); });
    for (const auto& x : u) CHECK(std::abs(x - std::exp(-1.0)) <= 1e-10);
    g.theta = Complex(0.0, -1.0);
    const auto w = solve_backward_pde(g, [](double) { return Complex(1.0); });
    for (const auto& x : w) CHECK(std::abs(x - std::polar(1.0, 1.0)) <= 1e-10);
}

TEST_CASE("backward PDE propagates a narrow heat kernel") {
    PDEGrid g;
    g.intervals = 2048;
    g.time_steps = 1000;
    const double eps = 0.01, y = 0.5;
    const auto u = solve_backward_pde(g, [&](double z) { return Complex(heat_kernel(z, y, eps)); });
    double worst = 0.0;
    for (int j = 0; j <= g.intervals; ++j)
        worst = std::max(worst, std::abs(u[j].real() - heat_kernel(g.x(j), y, 1.0 + eps)));
    CHECK(worst <= 1e-4);
}

TEST_CASE("backward PDE self-convergence on the oscillator") {
    auto solve = [](int J, int N) {
        PDEGrid g;
        g.intervals = J;
        g.time_steps = N;
        g.potential = [](double, double x) { return 0.5 * x * x; };
        const auto u = solve_backward_pde(g, [](double x) { return Complex(std::exp(-x * x)); });
        return std::pair{g, u};
    };
    const auto [g1, u1] = solve(128, 100);
    const auto [g2, u2] = solve(256, 200);
    const auto [g3, u3] = solve(512, 400);
    double d12 = 0.0, d23 = 0.0;
    for (int j = 0; j <= 128; ++j) {
        d12 = std::max(d12, std::abs(u1[j] - u2[2 * j]));
        d23 = std::max(d23, std::abs(u2[2 * j] - u3[4 * j]));
    }
    CHECK(d12 / d23 >= 3.5);
}

TEST_CASE("backward PDE agrees with Mehler and the analytic bridge expectation") {
    auto v = [](double x) { return 0.5 * x * x; };
    const Complex e = pde_bridge_expectation(0.0, 0.0, 1.0, 1.0, v);
    CHECK(std::abs(e.real() * heat_kernel(0.0, 0.0, 1.0) - mehler_kernel(0.0, 0.0, 1.0, 1.0)) <= 1e-4);
    const double w = std::sqrt(0.5);
    CHECK(std::abs(pde_bridge_expectation(0.0, 0.0, 1.0, 0.5, v) - std::sqrt(w / std::sinh(w))) <= 1e-4);
    const Complex off = pde_bridge_expectation(0.4, -0.3, 1.0, 1.0, v);
    CHECK(std::abs(off.real() * heat_kernel(0.4, -0.3, 1.0) - mehler_kernel(0.4, -0.3, 1.0, 1.0)) <= 1e-4);
}

TEST_CASE("PDE stability budget") {
    PDEGrid g;
    g.intervals = 64;
    g.time_steps = 10;
    g.potential = [](double, double) { return 100.0; };
    try {
        solve_backward_pde(g, [](double) { return Complex(1.0); });
        FAIL("expected a step-size error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StepSize);
    }
}

TEST_CASE("lattice path sum") {
    LatticeInstance inst;
    SUBCASE("free lattice normalizes to one") {
        const auto r = lattice_path_sum(inst, Signature::Euclidean);
        CHECK(std::abs(r.brute_force - 1.0) <= 1e-15);
    }
    SUBCASE("single step is the kernel entry") {
        inst.steps = 1;
        inst.start_site = 1;
        inst.end_site = 3;
        inst.potential = [](double x) { return 0.5 * x * x; };
        const auto r = lattice_path_sum(inst, Signature::Euclidean);
        const double x0 = -2.0 + 1.0;
        CHECK(std::abs(r.brute_force - std::exp(-0.5 * x0 * x0)) <= 1e-15);
    }
    SUBCASE("brute force equals the transfer matrix") {
        inst.potential = [](double x) { return 0.5 * x * x; };
        for (auto mode : {Signature::Euclidean, Signature::Lorentzian}) {
            const auto r = lattice_path_sum(inst, mode);
            CHECK(std::abs(r.brute_force - r.transfer_matrix) <= 1e-12);
            CHECK(std::abs(r.raw_brute_force - r.raw_transfer_matrix) <= 1e-12 * std::abs(r.raw_transfer_matrix));
        }
    }
    SUBCASE("size guard") {
        inst.sites = 8;
        CHECK_THROWS_AS(lattice_path_sum(inst, Signature::Euclidean), Error);
        inst.sites = 5;
        inst.steps = 7;
        CHECK_THROWS_AS(lattice_path_sum(inst, Signature::Euclidean), Error);
    }
}

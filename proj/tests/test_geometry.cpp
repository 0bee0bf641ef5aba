#include "doctest.h"

#include "tubepi/errors.hpp"
#include "tubepi/geometry.hpp"
#include "tubepi/potentials.hpp"

#include <cmath>
#include <numbers>

using namespace tubepi;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST_CASE("flat chart has identity metric and vanishing Christoffel symbols") {
    auto chart = make_flat_chart(3, potentials::free());
    const Vec q = Vec::Constant(3, 0.4);
    CHECK((chart.metric(q) - Mat::Identity(3, 3)).norm() == 0.0);
    const auto gamma = christoffel(chart, q);
    for (const auto& m : gamma.upper) CHECK(m.norm() == 0.0);
}

TEST_CASE("degenerate metric is rejected") {
    auto chart = MetricChart::user(2, [](const Vec&) { return Mat(Mat::Zero(2, 2)); }, [](const Vec&) { return 0.0; });
    CHECK_THROWS_AS(chart.inverse_metric(v2(0, 0)), Error);
    try {
        chart.inverse_metric(v2(0, 0));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateMetric);
    }
}

TEST_CASE("conformal Christoffel symbols match the closed form") {
    const double alpha = 0.3;
    auto chart = make_user_chart(2, metrics::conformal(alpha), potentials::free());
    const auto gamma = christoffel(chart, v2(0.2, -0.1));
    // g = e^{2 phi} I with d_i phi = alpha: Gamma^k_ij = d_ik a + d_jk a - d_ij a.
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const double expected = alpha * ((i == k) + (j == k) - (i == j));
                CHECK(gamma(k, i, j) == doctest::Approx(expected).epsilon(1e-7));
            }
}

TEST_CASE("free particle trajectory is the straight line") {
    auto chart = make_flat_chart(2, potentials::free());
    const auto traj = solve_classical_trajectory(chart, v2(0, 0), v2(1, 2), 2.0);
    CHECK(traj.energy == doctest::Approx(0.5 * 5.0 / 4.0).epsilon(1e-12));
    for (std::size_t k = 0; k < traj.points.size(); ++k) {
        const double s = traj.grid.t[k] / 2.0;
        CHECK((traj.points[k] - v2(s, 2 * s)).norm() < 1e-10);
    }
}

TEST_CASE("oscillator trajectory matches sin t / sin T") {
    auto chart = make_flat_chart(1, potentials::harmonic(1.0));
    const auto traj = solve_classical_trajectory(chart, v1(0), v1(1), 1.0);
    for (std::size_t k = 0; k < traj.points.size(); k += 32)
        CHECK(traj.points[k][0] == doctest::Approx(std::sin(traj.grid.t[k]) / std::sin(1.0)).epsilon(1e-8));
}

TEST_CASE("momentum seed selects the branch of a degenerate oscillator problem") {
    // At T = pi every q = a sin t joins 0 to 0.
    auto chart = make_flat_chart(1, potentials::harmonic(1.0));
    for (double a : {0.0, 0.3, -0.5}) {
        TrajectoryOptions opt;
        opt.momentum_seed = v1(a);
        opt.bvp_tol = 1e-8;
        const auto traj = solve_classical_trajectory(chart, v1(0), v1(0), std::numbers::pi, opt);
        const std::size_t mid = traj.points.size() / 2;
        CHECK(traj.points[mid][0] == doctest::Approx(a).epsilon(1e-6));
    }
}

TEST_CASE("trajectory errors") {
    auto chart = make_flat_chart(1, potentials::free());
    CHECK_THROWS_AS(solve_classical_trajectory(chart, v1(0), v1(1), -1.0), Error);
    CHECK_THROWS_AS(solve_classical_trajectory(chart, v2(0, 0), v1(1), 1.0), Error);
}

TEST_CASE("fixed-energy solver hits the requested shell") {
    auto chart = make_flat_chart(1, potentials::free());
    TrajectoryOptions opt;
    opt.solver = TrajectorySolver::FixedEnergy;
    opt.target_energy = 2.0;  // speed 2, so T = 0.5
    const auto traj = solve_classical_trajectory(chart, v1(0), v1(1), 1.0, opt);
    CHECK(traj.energy == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(traj.duration() == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("RK4 energy drift drops at least eightfold under step halving") {
    auto chart = make_flat_chart(1, potentials::quartic(1.0));
    const auto coarse = integrate_hamiltonian(chart, v1(1.0), v1(0.5), 2.0, 40);
    const auto fine = integrate_hamiltonian(chart, v1(1.0), v1(0.5), 2.0, 80);
    const double a = coarse.max_energy_drift(chart);
    const double b = fine.max_energy_drift(chart);
    REQUIRE(b > 0.0);
    CHECK(a / b >= 8.0);
}

TEST_CASE("parallel frame is orthonormal and parallel") {
    SUBCASE("flat") {
        auto chart = make_flat_chart(3, potentials::harmonic(1.0));
        Vec a(3), b(3);
        a << 0, 0, 0;
        b << 1, 0.5, -0.2;
        const auto traj = solve_classical_trajectory(chart, a, b, 1.0);
        const auto frame = parallel_frame(chart, traj);
        CHECK(frame.max_orthonormality_error(chart, traj) <= 1e-8);
        CHECK(frame.normal_indices().size() == 2);
    }
    SUBCASE("curved") {
        auto chart = make_user_chart(2, metrics::conformal(0.2), potentials::free());
        const auto traj = solve_classical_trajectory(chart, v2(0, 0), v2(1, 0.5), 1.0);
        const auto frame = parallel_frame(chart, traj);
        CHECK(frame.max_orthonormality_error(chart, traj) <= 1e-6);
        CHECK(frame.max_connection() < 1e-3);
    }
}

TEST_CASE("exp and log maps invert each other") {
    auto chart = make_user_chart(2, metrics::conformal(0.25), potentials::free());
    const Vec base = v2(0.1, -0.2);
    const Vec v = v2(0.3, 0.15);
    const Vec q = exp_map(chart, base, v);
    CHECK((log_map(chart, base, q) - v).norm() < 1e-9);
    auto flat = make_flat_chart(2, potentials::free());
    CHECK((exp_map(flat, base, v) - (base + v)).norm() == 0.0);
}

TEST_CASE("g-orthonormalization") {
    auto chart = make_user_chart(2, metrics::conformal(0.4), potentials::free());
    const Vec q = v2(0.3, 0.1);
    Mat c(2, 2);
    c << 1, 1, 0, 1;
    const Mat e = g_orthonormalize(chart, q, c);
    const Mat gram = e.transpose() * chart.metric(q) * e;
    CHECK((gram - Mat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("time grid validation") {
    TimeGrid g;
    g.t = {0.0, 0.5, 0.5};
    CHECK_THROWS_AS(g.validate(), Error);
    CHECK_NOTHROW(TimeGrid::uniform(1.0, 4).validate());
}

#include "doctest.h"

#include "tubepi/errors.hpp"
#include "tubepi/potentials.hpp"
#include "tubepi/tube.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace tubepi;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

ClassicalTrajectory free_line(int steps = 256) {
    auto chart = make_flat_chart(1, potentials::free());
    TrajectoryOptions opt;
    opt.steps = steps;
    return solve_classical_trajectory(chart, v1(0), v1(1), 1.0, opt);
}

DiscretePath sine_perturbed(const ClassicalTrajectory& traj, double eps) {
    auto p = DiscretePath::from_trajectory(traj);
    for (std::size_t k = 0; k < p.nodes(); ++k) p.points[k][0] += eps * std::sin(std::numbers::pi * p.grid.t[k]);
    p.points.back() = traj.points.back();
    return p;
}

}  // namespace

TEST_CASE("action of simple paths") {
    auto chart = make_flat_chart(1, potentials::free());
    CHECK(action(chart, DiscretePath::from_trajectory(free_line())) == doctest::Approx(0.5).epsilon(1e-12));

    auto osc = make_flat_chart(1, potentials::harmonic(1.0));
    DiscretePath rest{TimeGrid::uniform(1.0, 16), std::vector<Vec>(17, v1(0))};
    CHECK(action(osc, rest) == 0.0);
}

TEST_CASE("oscillator classical action converges to the closed form") {
    // A = 0, B = 1, omega = 1: S = cot(T) / 2.
    auto osc = make_flat_chart(1, potentials::harmonic(1.0));
    auto err = [&](int steps) {
        TrajectoryOptions opt;
        opt.steps = steps;
        const auto traj = solve_classical_trajectory(osc, v1(0), v1(1), 1.0, opt);
        return std::abs(action(osc, DiscretePath::from_trajectory(traj)) - 0.5 / std::tan(1.0));
    };
    const double e1 = err(64), e2 = err(128);
    CHECK(e1 < 1e-3);
    CHECK(e1 / e2 > 3.5);
}

TEST_CASE("H1 distance") {
    const auto traj = free_line(512);
    CHECK(h1_distance(DiscretePath::from_trajectory(traj), traj) == 0.0);
    const double eps = 0.01;
    const double expected = eps * std::sqrt(0.5 + std::numbers::pi * std::numbers::pi / 2.0);
    CHECK(h1_distance(sine_perturbed(traj, eps), traj) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("default radius") {
    CHECK(default_radius(1.0, 1.0) == 0.7071067811865476);
    CHECK(default_radius(2.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(default_radius(0.0, 1.0), Error);
}

TEST_CASE("action deviation of a sine perturbation of the free particle") {
    auto chart = make_flat_chart(1, potentials::free());
    const auto traj = free_line(1024);
    const auto spec = TubeSpec::with_defaults(traj);
    const double threshold = 2.0 * std::sqrt(spec.eta_action) / std::numbers::pi;
    for (double eps : {0.1, 0.3}) {
        const auto d = action_deviation(chart, sine_perturbed(traj, eps), spec);
        CHECK(d.delta == doctest::Approx(eps * eps * std::numbers::pi * std::numbers::pi / 4.0).epsilon(1e-4));
        CHECK(d.within_bound == (eps < threshold));
    }
    CHECK_FALSE(action_deviation(chart, sine_perturbed(traj, 1.1 * threshold), spec).within_bound);
    CHECK(action_deviation(chart, sine_perturbed(traj, 0.9 * threshold), spec).within_bound);
}

TEST_CASE("resolvent values and pole guard") {
    auto spec = TubeSpec::with_defaults(free_line());
    spec.delta_E = 1.0;
    const double E0 = spec.E0;
    CHECK(resolvent(E0, spec) == doctest::Approx(1.0));
    CHECK(resolvent(E0 + 2.0, spec) == doctest::Approx(-1.0 / 3.0));
    // Grows toward the pole; at the guard edge |f| = 1 / (pg (2 - pg) dE^2).
    const double pg = 0.05;
    CHECK(std::abs(resolvent(E0 + 0.9, spec)) > std::abs(resolvent(E0 + 0.5, spec)));
    const double edge = E0 + (1.0 - pg) + 1e-12;
    CHECK(std::abs(resolvent(edge - 2e-12, spec)) == doctest::Approx(1.0 / (pg * (2.0 - pg))).epsilon(1e-6));
    CHECK_THROWS_AS(resolvent(E0 + 1.0, spec), Error);
    CHECK_THROWS_AS(resolvent(E0 - 0.99, spec), Error);
}

TEST_CASE("admissibility probe") {
    auto chart = make_flat_chart(1, potentials::free());
    const auto traj = free_line(512);
    const auto spec = TubeSpec::with_defaults(traj);

    SUBCASE("reference trajectory cancels") {
        const auto r = admissibility_probe(chart, DiscretePath::from_trajectory(traj), spec);
        CHECK(std::abs(r.value) < 1e-12);
        CHECK(r.admissible);
        CHECK_FALSE(r.divergent);
    }
    // Energy excess of eps sin(pi t) on a unit-speed line: max |dE| ~ pi eps + (pi eps)^2 / 2.
    auto excess = [](double eps) {
        const double a = std::numbers::pi * eps;
        return a + 0.5 * a * a;
    };
    auto eps_for = [&](double target) {
        double lo = 0, hi = 1;
        for (int i = 0; i < 100; ++i) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) < target ? lo : hi) = mid;
        }
        return lo;
    };
    SUBCASE("energy excess of 1.5 dE diverges") {
        const auto r = admissibility_probe(chart, sine_perturbed(traj, eps_for(1.5 * spec.delta_E)), spec);
        CHECK(r.divergent);
        CHECK_FALSE(r.admissible);
    }
    SUBCASE("energy excess of 0.5 dE is finite and resolution-stable") {
        const double eps = eps_for(0.5 * spec.delta_E);
        const auto r = admissibility_probe(chart, sine_perturbed(traj, eps), spec);
        CHECK_FALSE(r.divergent);
        CHECK(r.admissible);
        const auto fine = free_line(1024);
        const auto rf = admissibility_probe(chart, sine_perturbed(fine, eps), TubeSpec::with_defaults(fine));
        CHECK(std::abs(r.value - rf.value) <= 1e-3 * std::abs(rf.value));
    }
    SUBCASE("open loop") {
        auto p = DiscretePath::from_trajectory(traj);
        p.points.back()[0] += 0.1;
        CHECK_THROWS_AS(admissibility_probe(chart, p, spec), Error);
    }
}

TEST_CASE("path CSV round trip and parse errors") {
    const auto traj = free_line(16);
    auto p = DiscretePath::from_trajectory(traj);
    std::stringstream ss;
    write_path_csv(ss, p);
    const auto back = read_path_csv(ss);
    REQUIRE(back.nodes() == p.nodes());
    for (std::size_t k = 0; k < p.nodes(); ++k) CHECK(back.points[k][0] == p.points[k][0]);

    std::stringstream many;
    write_paths_csv(many, {p, sine_perturbed(traj, 0.1)});
    CHECK(read_paths_csv(many).size() == 2);

    std::stringstream bad("t,q1\n0,0\n0.5,abc\n1,1\n");
    try {
        read_path_csv(bad);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

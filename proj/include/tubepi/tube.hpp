#pragma once

#include "tubepi/geometry.hpp"

#include <iosfwd>
#include <vector>

namespace tubepi {

// Restricted path space around a classical trajectory. eta_action bounds the
// action deviation (units of hbar), radius caps the pointwise normal
// displacement (configuration-space length).
struct TubeSpec {
    ClassicalTrajectory trajectory;
    double eta_action = 0.5;
    double radius = 0.7071067811865476;
    double hbar = 1.0;
    double delta_E = 0.5;
    double E0 = 0.0;
    double coercivity = 1.0;

    // eta = hbar/2, radius = sqrt(hbar/(2c)), delta_E = eta/T, E0 = trajectory energy.
    static TubeSpec with_defaults(ClassicalTrajectory trajectory, double hbar = 1.0, double coercivity = 1.0);
    void validate() const;
};

struct DiscretePath {
    TimeGrid grid;
    std::vector<Vec> points;

    static DiscretePath from_trajectory(const ClassicalTrajectory& traj);
    std::size_t nodes() const { return points.size(); }
    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
    void validate() const;
};

struct ProbeResult {
    double value = 0.0;
    bool divergent = false;
    double min_margin = 0.0;
    bool admissible = false;
};

struct ProbeOptions {
    double pole_guard = 0.05;
    double endpoint_tol = 1e-9;
};

// Trapezoid rule for the potential, segment (midpoint) differences for the kinetic term.
double action(const MetricChart& chart, const DiscretePath& path);

// sqrt( int |a - b|^2 + |a' - b'|^2 dt ) on the shared grid.
double h1_distance(const DiscretePath& a, const DiscretePath& b);
double h1_distance(const DiscretePath& path, const ClassicalTrajectory& gamma0);

double default_radius(double hbar, double coercivity);

struct ActionDeviation {
    double delta = 0.0;
    bool within_bound = true;
};

ActionDeviation action_deviation(const MetricChart& chart, const DiscretePath& path, const TubeSpec& spec);

// f(E) = 1 / (dE^2 - (E - E0)^2). Throws NearPole within pole_guard * dE of a pole.
double resolvent(double energy, const TubeSpec& spec, double pole_guard = 0.05);

// Loop integral of f(H) p.dq over the path followed by the reversed reference
// trajectory; divergent once any segment gets within the guard band of a pole.
ProbeResult admissibility_probe(const MetricChart& chart, const DiscretePath& path, const TubeSpec& spec,
                                const ProbeOptions& options = {});

// Single path, header t,q1,...,qn.
DiscretePath read_path_csv(std::istream& in);
void write_path_csv(std::ostream& out, const DiscretePath& path);

// Several paths in one file, header path,t,q1,...,qn; a plain t,q1,... file
// is read as a single path.
std::vector<DiscretePath> read_paths_csv(std::istream& in);
void write_paths_csv(std::ostream& out, const std::vector<DiscretePath>& paths);

}  // namespace tubepi

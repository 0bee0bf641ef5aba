#include "tubepi/tube.hpp"

#include "tubepi/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace tubepi {

TubeSpec TubeSpec::with_defaults(ClassicalTrajectory trajectory, double hbar, double coercivity) {
    TubeSpec spec;
    spec.hbar = hbar;
    spec.coercivity = coercivity;
    spec.eta_action = hbar / 2.0;
    spec.radius = default_radius(hbar, coercivity);
    spec.delta_E = spec.eta_action / trajectory.duration();
    spec.E0 = trajectory.energy;
    spec.trajectory = std::move(trajectory);
    return spec;
}

void TubeSpec::validate() const {
    if (!(radius > 0.0)) throw Error(ErrorKind::Domain, "tube radius must be positive");
    if (!(eta_action > 0.0)) throw Error(ErrorKind::Domain, "eta_action must be positive");
    if (!(delta_E > 0.0)) throw Error(ErrorKind::Domain, "delta_E must be positive");
    if (!(hbar > 0.0)) throw Error(ErrorKind::Domain, "hbar must be positive");
    if (!(coercivity > 0.0)) throw Error(ErrorKind::Domain, "coercivity must be positive");
}

DiscretePath DiscretePath::from_trajectory(const ClassicalTrajectory& traj) {
    return {traj.grid, traj.points};
}

void DiscretePath::validate() const {
    grid.validate();
    if (points.size() != grid.nodes()) throw Error(ErrorKind::Shape, "path and grid lengths differ");
    for (const auto& p : points)
        if (p.size() != points.front().size()) throw Error(ErrorKind::Shape, "ragged path dimensions");
}

double action(const MetricChart& chart, const DiscretePath& path) {
    path.validate();
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < path.nodes(); ++k) {
        const double dt = path.grid.dt(k);
        const Vec vel = (path.points[k + 1] - path.points[k]) / dt;
        const Vec mid = 0.5 * (path.points[k] + path.points[k + 1]);
        const double kinetic = 0.5 * chart.inner(mid, vel, vel);
        const double pot = 0.5 * (chart.potential(path.points[k]) + chart.potential(path.points[k + 1]));
        s += dt * (kinetic - pot);
    }
    return s;
}

double h1_distance(const DiscretePath& a, const DiscretePath& b) {
    a.validate();
    b.validate();
    if (a.nodes() != b.nodes() || a.dim() != b.dim())
        throw Error(ErrorKind::Shape, "h1_distance needs paths on the same grid");
    for (std::size_t k = 0; k < a.nodes(); ++k)
        if (std::abs(a.grid.t[k] - b.grid.t[k]) > 1e-12 * (1.0 + std::abs(a.grid.t[k])))
            throw Error(ErrorKind::Shape, "h1_distance needs paths on the same grid");
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < a.nodes(); ++k) {
        const double dt = a.grid.dt(k);
        const Vec d0 = a.points[k] - b.points[k];
        const Vec d1 = a.points[k + 1] - b.points[k + 1];
        sum += 0.5 * dt * (d0.squaredNorm() + d1.squaredNorm());
        sum += (d1 - d0).squaredNorm() / dt;
    }
    return std::sqrt(sum);
}

double h1_distance(const DiscretePath& path, const ClassicalTrajectory& gamma0) {
    return h1_distance(path, DiscretePath::from_trajectory(gamma0));
}

double default_radius(double hbar, double coercivity) {
    if (!(hbar > 0.0) || !(coercivity > 0.0))
        throw Error(ErrorKind::Domain, "default_radius needs positive hbar and coercivity");
    return std::sqrt(hbar / (2.0 * coercivity));
}

ActionDeviation action_deviation(const MetricChart& chart, const DiscretePath& path, const TubeSpec& spec) {
    const double delta = action(chart, path) - action(chart, DiscretePath::from_trajectory(spec.trajectory));
    return {delta, std::abs(delta) <= spec.eta_action};
}

double resolvent(double energy, const TubeSpec& spec, double pole_guard) {
    const double offset = std::abs(energy - spec.E0);
    if (std::abs(offset - spec.delta_E) < pole_guard * spec.delta_E) {
        std::ostringstream os;
        os << "energy " << energy << " is within the guard band of a resolvent pole";
        throw Error(ErrorKind::NearPole, os.str());
    }
    return 1.0 / (spec.delta_E * spec.delta_E - (energy - spec.E0) * (energy - spec.E0));
}

namespace {

struct LegSum {
    double value = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    bool divergent = false;
};

// Sum of f(H) p.dq over the path segments, lifting each segment to phase space
// through p = g(q_mid) dq/dt.
LegSum probe_leg(const MetricChart& chart, const DiscretePath& path, const TubeSpec& spec, double pole_guard) {
    LegSum leg;
    const double dE2 = spec.delta_E * spec.delta_E;
    for (std::size_t k = 0; k + 1 < path.nodes(); ++k) {
        const double dt = path.grid.dt(k);
        const Vec dq = path.points[k + 1] - path.points[k];
        const Vec vel = dq / dt;
        const Vec mid = 0.5 * (path.points[k] + path.points[k + 1]);
        const Vec p = chart.is_flat() ? vel : Vec(chart.metric(mid) * vel);
        const double h = 0.5 * vel.dot(p) + chart.potential(mid);
        const double excess = std::abs(h - spec.E0);
        leg.min_margin = std::min(leg.min_margin, spec.delta_E - excess);
        if (excess >= (1.0 - pole_guard) * spec.delta_E) {
            leg.divergent = true;
            continue;
        }
        leg.value += p.dot(dq) / (dE2 - (h - spec.E0) * (h - spec.E0));
    }
    return leg;
}

}  // namespace

ProbeResult admissibility_probe(const MetricChart& chart, const DiscretePath& path, const TubeSpec& spec,
                                const ProbeOptions& options) {
    path.validate();
    const auto& traj = spec.trajectory;
    if (path.dim() != traj.dim()) throw Error(ErrorKind::Shape, "path dimension does not match trajectory");
    if ((path.points.front() - traj.start).norm() > options.endpoint_tol ||
        (path.points.back() - traj.end).norm() > options.endpoint_tol)
        throw Error(ErrorKind::Contour, "path endpoints do not close the loop with the reference trajectory");

    const LegSum forward = probe_leg(chart, path, spec, options.pole_guard);
    const LegSum backward = probe_leg(chart, DiscretePath::from_trajectory(traj), spec, options.pole_guard);

    ProbeResult r;
    r.min_margin = std::min(forward.min_margin, backward.min_margin);
    r.divergent = forward.divergent || backward.divergent;
    r.value = r.divergent ? std::numeric_limits<double>::infinity() : forward.value - backward.value;
    r.admissible = !r.divergent && std::isfinite(r.value) && r.min_margin > options.pole_guard * spec.delta_E;
    return r;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& s, std::size_t row) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
        throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": malformed number '" + s + "'");
    return v;
}

bool next_line(std::istream& in, std::string& line, std::size_t& row) {
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
}

void check_header(const std::vector<std::string>& header, std::size_t offset) {
    if (header.size() < offset + 2 || header[offset] != "t")
        throw Error(ErrorKind::Parse, "row 1: expected header t,q1,...,qn");
    for (std::size_t i = offset + 1; i < header.size(); ++i)
        if (header[i] != "q" + std::to_string(i - offset))
            throw Error(ErrorKind::Parse, "row 1: unexpected column '" + header[i] + "'");
}

void finish_path(DiscretePath& path, std::size_t row) {
    try {
        path.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Parse, "path ending at row " + std::to_string(row) + ": " + e.what());
    }
}

}  // namespace

DiscretePath read_path_csv(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    if (!next_line(in, line, row)) throw Error(ErrorKind::Parse, "empty path file");
    const auto header = split_csv(line);
    check_header(header, 0);
    const std::size_t n = header.size() - 1;
    DiscretePath path;
    while (next_line(in, line, row)) {
        const auto cells = split_csv(line);
        if (cells.size() != n + 1)
            throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": expected " + std::to_string(n + 1) + " columns");
        const double t = parse_cell(cells[0], row);
        if (!path.grid.t.empty() && !(t > path.grid.t.back()))
            throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": times must be strictly increasing");
        Vec q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = parse_cell(cells[i + 1], row);
        path.grid.t.push_back(t);
        path.points.push_back(q);
    }
    finish_path(path, row);
    return path;
}

void write_path_csv(std::ostream& out, const DiscretePath& path) {
    out << "t";
    for (int i = 1; i <= path.dim(); ++i) out << ",q" << i;
    out << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < path.nodes(); ++k) {
        out << path.grid.t[k];
        for (int i = 0; i < path.dim(); ++i) out << ',' << path.points[k][i];
        out << '\n';
    }
}

std::vector<DiscretePath> read_paths_csv(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    if (!next_line(in, line, row)) throw Error(ErrorKind::Parse, "empty paths file");
    const auto header = split_csv(line);
    if (!header.empty() && header[0] == "t") {
        std::ostringstream buf;
        buf << line << '\n' << in.rdbuf();
        std::istringstream again(buf.str());
        return {read_path_csv(again)};
    }
    if (header.empty() || header[0] != "path") throw Error(ErrorKind::Parse, "row 1: expected header path,t,q1,...,qn");
    check_header(header, 1);
    const std::size_t n = header.size() - 2;

    std::vector<DiscretePath> paths;
    std::map<std::string, std::size_t> index;
    std::string current;
    std::size_t last_row = row;
    while (next_line(in, line, row)) {
        const auto cells = split_csv(line);
        if (cells.size() != n + 2)
            throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": expected " + std::to_string(n + 2) + " columns");
        if (cells[0].empty()) throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": missing path id");
        if (cells[0] != current) {
            if (index.count(cells[0]))
                throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": rows of path '" + cells[0] + "' are not contiguous");
            if (!paths.empty()) finish_path(paths.back(), last_row);
            index[cells[0]] = paths.size();
            paths.emplace_back();
            current = cells[0];
        }
        auto& path = paths.back();
        const double t = parse_cell(cells[1], row);
        if (!path.grid.t.empty() && !(t > path.grid.t.back()))
            throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": times must be strictly increasing");
        Vec q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = parse_cell(cells[i + 2], row);
        path.grid.t.push_back(t);
        path.points.push_back(q);
        last_row = row;
    }
    if (paths.empty()) throw Error(ErrorKind::Parse, "paths file has no rows");
    finish_path(paths.back(), last_row);
    return paths;
}

void write_paths_csv(std::ostream& out, const std::vector<DiscretePath>& paths) {
    const int n = paths.empty() ? 0 : paths.front().dim();
    out << "path,t";
    for (int i = 1; i <= n; ++i) out << ",q" << i;
    out << '\n' << std::setprecision(17);
    for (std::size_t p = 0; p < paths.size(); ++p)
        for (std::size_t k = 0; k < paths[p].nodes(); ++k) {
            out << p << ',' << paths[p].grid.t[k];
            for (int i = 0; i < n; ++i) out << ',' << paths[p].points[k][i];
            out << '\n';
        }
}

}  // namespace tubepi

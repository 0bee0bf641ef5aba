#include "tubepi/integrator.hpp"

#include "tubepi/errors.hpp"
#include "tubepi/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tubepi {

namespace {

constexpr std::uint64_t kTimeChannel = 3;

MCAccumulator reduce(const std::vector<Complex>& values) {
    MCAccumulator total;
    for (std::size_t b = 0; b < values.size(); b += kBlockSize) {
        MCAccumulator block;
        const std::size_t end = std::min(values.size(), b + kBlockSize);
        for (std::size_t i = b; i < end; ++i) block.add(values[i]);
        total.merge(block);
    }
    return total;
}

KernelEstimate finish(const MCAccumulator& acc, const Ensemble& ensemble, Signature mode) {
    if (acc.count() == 0) throw Error(ErrorKind::NoData, "empty ensemble");
    auto e = KernelEstimate::from(acc);
    e.mode = to_string(mode);
    e.seed = ensemble.options().seed;
    return e;
}

void require_samples(const Ensemble& ensemble) {
    if (ensemble.size() == 0) throw Error(ErrorKind::NoData, "empty ensemble");
}

// Densities whose trapezoid sum is the exponent of the weight.
std::vector<double> channel_density(const MetricChart& chart, const DiscretePath& path, Signature mode,
                                    ActionChannel channel, double hbar) {
    if (channel == ActionChannel::PotentialOnly || mode == Signature::Euclidean)
        return euclidean_density(chart, path, channel == ActionChannel::PotentialOnly, hbar);
    auto d = euclidean_density(chart, path, false, hbar);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] -= 2.0 * chart.potential(path.points[k]) / hbar;
    return d;
}

Complex phase_weight(double s, Signature mode) {
    return mode == Signature::Euclidean ? Complex(std::exp(-s), 0.0) : std::polar(1.0, s);
}

struct FKRecord {
    Complex weighted_f;  // w f(X_T)
    double area = 0.0;   // A = int V_E dt
    double sup = 0.0;    // max_k |V_E(t_k, X_k)|
};

std::vector<FKRecord> fk_records(const Ensemble& ensemble, const Observable& f) {
    require_samples(ensemble);
    const double hbar = ensemble.spec().hbar;
    return map_samples(ensemble, [&](std::size_t, const Sample& s) {
        FKRecord r;
        const auto v = euclidean_density(ensemble.chart(), s.path, true, hbar);
        r.area = trapezoid(s.path.grid, v);
        for (double x : v) r.sup = std::max(r.sup, std::abs(x));
        r.weighted_f = importance_weight(ensemble, s.fluctuation) * f(s.path);
        return r;
    });
}

double density_bound_from(const std::vector<FKRecord>& records, std::optional<double> supplied, double T) {
    double C;
    if (supplied) {
        if (!(*supplied >= 0.0)) throw Error(ErrorKind::Domain, "density bound must be non-negative");
        C = *supplied;
    } else {
        double m = 0.0;
        for (const auto& r : records) m = std::max(m, r.sup);
        C = 1.1 * m;
    }
    const double limit = C * T * (1.0 + 1e-9);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (std::abs(records[i].area) > limit)
            throw Error(ErrorKind::BoundViolation, "sample " + std::to_string(i) + ": |A| = " +
                                                       std::to_string(std::abs(records[i].area)) + " exceeds CT = " +
                                                       std::to_string(C * T));
    }
    return C;
}

}  // namespace

Observable Observable::constant(Complex c) {
    return endpoint([c](const Vec&) { return c; }, std::abs(c));
}

Observable Observable::endpoint(std::function<Complex(const Vec&)> f, double bound) {
    if (!f) throw Error(ErrorKind::Domain, "observable without evaluator");
    if (!(bound >= 0.0) || !std::isfinite(bound)) throw Error(ErrorKind::Domain, "observable bound must be finite");
    Observable o;
    o.kind_ = ObservableKind::Endpoint;
    o.endpoint_ = std::move(f);
    o.bound_ = bound;
    return o;
}

Observable Observable::path_functional(std::function<Complex(const DiscretePath&)> f, double bound) {
    if (!f) throw Error(ErrorKind::Domain, "observable without evaluator");
    if (!(bound >= 0.0) || !std::isfinite(bound)) throw Error(ErrorKind::Domain, "observable bound must be finite");
    Observable o;
    o.kind_ = ObservableKind::PathFunctional;
    o.functional_ = std::move(f);
    o.bound_ = bound;
    return o;
}

Observable Observable::fiber(std::function<Complex(const Vec&, double)> f, double bound) {
    if (!f) throw Error(ErrorKind::Domain, "observable without evaluator");
    if (!(bound >= 0.0) || !std::isfinite(bound)) throw Error(ErrorKind::Domain, "observable bound must be finite");
    Observable o;
    o.kind_ = ObservableKind::Fiber;
    o.fiber_ = std::move(f);
    o.bound_ = bound;
    return o;
}

Complex Observable::checked(Complex v) const {
    if (!(std::abs(v) <= bound_ * (1.0 + 1e-12)))
        throw Error(ErrorKind::MisdeclaredBound,
                    "|O| = " + std::to_string(std::abs(v)) + " exceeds declared bound " + std::to_string(bound_));
    return v;
}

Complex Observable::operator()(const DiscretePath& path) const {
    switch (kind_) {
        case ObservableKind::Endpoint:
            return checked(endpoint_(path.points.back()));
        case ObservableKind::PathFunctional:
            return checked(functional_(path));
        case ObservableKind::Fiber:
            break;
    }
    throw Error(ErrorKind::Domain, "fiber observable needs a point and a time");
}

Complex Observable::operator()(const Vec& x, double t) const {
    switch (kind_) {
        case ObservableKind::Endpoint:
            return checked(endpoint_(x));
        case ObservableKind::Fiber:
            return checked(fiber_(x, t));
        case ObservableKind::PathFunctional:
            break;
    }
    throw Error(ErrorKind::Domain, "path functional needs a whole path");
}

PartitionSpec PartitionSpec::uniform(const TimeGrid& grid, int intervals) {
    if (intervals < 1) throw Error(ErrorKind::Partition, "partition needs at least one interval");
    const int steps = grid.steps();
    if (steps % intervals != 0)
        throw Error(ErrorKind::Partition, std::to_string(intervals) + " intervals do not nest in a grid of " +
                                              std::to_string(steps) + " steps");
    PartitionSpec p;
    const int stride = steps / intervals;
    for (int i = 0; i <= intervals; ++i) p.nodes.push_back(grid.t[static_cast<std::size_t>(i * stride)]);
    return p;
}

double PartitionSpec::mesh() const {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) m = std::max(m, nodes[i + 1] - nodes[i]);
    return m;
}

std::vector<std::size_t> PartitionSpec::grid_indices(const TimeGrid& grid) const {
    if (nodes.size() < 2) throw Error(ErrorKind::Partition, "partition needs at least two nodes");
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        if (!(nodes[i + 1] > nodes[i])) throw Error(ErrorKind::Partition, "partition nodes must increase");
    const double tol = 1e-12 * std::max(1.0, grid.duration());
    std::vector<std::size_t> out;
    std::size_t k = 0;
    for (double t : nodes) {
        while (k < grid.nodes() && grid.t[k] < t - tol) ++k;
        if (k == grid.nodes() || std::abs(grid.t[k] - t) > tol)
            throw Error(ErrorKind::Partition, "partition node " + std::to_string(t) + " is not a grid node");
        out.push_back(k);
    }
    if (out.front() != 0 || out.back() != grid.nodes() - 1)
        throw Error(ErrorKind::Partition, "partition must span the whole grid");
    return out;
}

std::vector<double> euclidean_density(const MetricChart& chart, const DiscretePath& path, bool potential_only,
                                      double hbar) {
    const std::size_t n = path.nodes();
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = chart.potential(path.points[k]) / hbar;
    if (potential_only) return d;
    const auto& t = path.grid.t;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t a = k == 0 ? 0 : k - 1;
        const std::size_t b = k + 1 == n ? k : k + 1;
        const Vec v = (path.points[b] - path.points[a]) / (t[b] - t[a]);
        d[k] += 0.5 * chart.inner(path.points[k], v, v) / hbar;
    }
    return d;
}

double trapezoid(const TimeGrid& grid, const std::vector<double>& density) {
    if (density.size() != grid.nodes()) throw Error(ErrorKind::Shape, "density and grid sizes differ");
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < density.size(); ++k) s += 0.5 * grid.dt(k) * (density[k] + density[k + 1]);
    return s;
}

double left_riemann(const TimeGrid& grid, const std::vector<double>& density,
                    const std::vector<std::size_t>& partition_indices) {
    if (density.size() != grid.nodes()) throw Error(ErrorKind::Shape, "density and grid sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < partition_indices.size(); ++i) {
        const std::size_t a = partition_indices[i];
        const std::size_t b = partition_indices[i + 1];
        s += density[a] * (grid.t[b] - grid.t[a]);
    }
    return s;
}

double importance_weight(const Ensemble& ensemble, const FluctuationPath& fluct) {
    if (ensemble.params().confined() && !fluct.in_tube) return 0.0;
    return ensemble.law() == SamplingLaw::Reweighted ? std::exp(fluct.log_girsanov) : 1.0;
}

KernelEstimate stochastic_path_integral(const Ensemble& ensemble, const Observable& observable, Signature mode,
                                        ActionChannel channel) {
    require_samples(ensemble);
    const double hbar = ensemble.spec().hbar;
    const auto values = map_samples(ensemble, [&](std::size_t, const Sample& s) {
        const double w = importance_weight(ensemble, s.fluctuation);
        const Complex o = observable(s.path);
        const double S = trapezoid(s.path.grid, channel_density(ensemble.chart(), s.path, mode, channel, hbar));
        const Complex phase = phase_weight(S, mode);
        if (mode == Signature::Lorentzian && std::abs(std::abs(phase) - 1.0) > 1e-12)
            throw Error(ErrorKind::Numerical, "lorentzian weight lost unit modulus");
        return w * o * phase;
    });
    return finish(reduce(values), ensemble, mode);
}

RiemannProductResult riemann_product(const Ensemble& ensemble, const PartitionSpec& partition,
                                     const Observable& observable, Signature mode, ActionChannel channel) {
    require_samples(ensemble);
    const auto indices = partition.grid_indices(ensemble.grid());
    const double hbar = ensemble.spec().hbar;
    struct Record {
        Complex product, integral;
        double gap = 0.0;
    };
    const auto records = map_samples(ensemble, [&](std::size_t, const Sample& s) {
        const double w = importance_weight(ensemble, s.fluctuation);
        const Complex o = observable(s.path);
        const auto d = channel_density(ensemble.chart(), s.path, mode, channel, hbar);
        const double S = trapezoid(s.path.grid, d);
        const double Sp = left_riemann(s.path.grid, d, indices);
        Record r;
        r.product = w * o * phase_weight(Sp, mode);
        r.integral = w * o * phase_weight(S, mode);
        r.gap = w * std::abs(o) * std::abs(S - Sp);
        return r;
    });
    std::vector<Complex> prod, integ, gap;
    prod.reserve(records.size());
    integ.reserve(records.size());
    gap.reserve(records.size());
    for (const auto& r : records) {
        prod.push_back(r.product);
        integ.push_back(r.integral);
        gap.push_back(r.gap);
    }
    RiemannProductResult out;
    out.product = finish(reduce(prod), ensemble, mode);
    out.product.partition_mesh = partition.mesh();
    out.integral = finish(reduce(integ), ensemble, mode);
    const auto g = reduce(gap);
    out.mean_abs_gap = g.mean().real();
    out.gap_std_error = g.std_error();
    return out;
}

double estimate_density_bound(const Ensemble& ensemble) {
    require_samples(ensemble);
    const double hbar = ensemble.spec().hbar;
    const auto sups = map_samples(ensemble, [&](std::size_t, const Sample& s) {
        double m = 0.0;
        for (double v : euclidean_density(ensemble.chart(), s.path, true, hbar)) m = std::max(m, std::abs(v));
        return m;
    });
    double m = 0.0;
    for (double v : sups) m = std::max(m, v);
    return 1.1 * m;
}

FeynmanKacResult feynman_kac_expectation(const Ensemble& ensemble, const Observable& f, Complex theta,
                                         std::optional<double> density_bound) {
    const auto records = fk_records(ensemble, f);
    const double T = ensemble.grid().duration();
    FeynmanKacResult out;
    out.sup_density = density_bound_from(records, density_bound, T);
    out.duration = T;
    std::vector<Complex> values;
    values.reserve(records.size());
    for (const auto& r : records) values.push_back(r.weighted_f * std::exp(-theta * r.area));
    out.estimate = finish(reduce(values), ensemble, Signature::Euclidean);
    out.estimate.mode = "theta";
    out.estimate.theta = theta;
    return out;
}

Complex ThetaSeries::evaluate(Complex theta) const {
    Complex sum{0.0, 0.0};
    Complex term{1.0, 0.0};
    for (std::size_t n = 0; n < coefficients.size(); ++n) {
        if (n > 0) term *= -theta / static_cast<double>(n);
        sum += coefficients[n] * term;
    }
    return sum;
}

double ThetaSeries::remainder_bound(Complex theta) const {
    const double x = std::abs(theta) * sup_density * duration;
    const int m = order() + 1;
    return observable_bound * std::exp(m * std::log(std::max(x, 1e-300)) - std::lgamma(m + 1.0) + x) *
           (x > 0.0 ? 1.0 : 0.0);
}

double ThetaSeries::coefficient_bound(int n) const {
    return observable_bound * std::pow(sup_density * duration, n);
}

bool ThetaSeries::coefficient_within_bound(int n) const {
    const auto k = static_cast<std::size_t>(n);
    return std::abs(coefficients.at(k)) <= coefficient_bound(n) * (1.0 + 3.0 * std_errors.at(k)) + 1e-300;
}

ThetaSeries theta_series(const Ensemble& ensemble, const Observable& f, int order,
                         std::optional<double> density_bound) {
    if (order < 0 || order > 30) throw Error(ErrorKind::Domain, "series order must lie in [0, 30]");
    const auto records = fk_records(ensemble, f);
    ThetaSeries out;
    out.duration = ensemble.grid().duration();
    out.sup_density = density_bound_from(records, density_bound, out.duration);
    out.observable_bound = f.bound();
    std::vector<Complex> values(records.size());
    for (int n = 0; n <= order; ++n) {
        for (std::size_t i = 0; i < records.size(); ++i)
            values[i] = records[i].weighted_f * std::pow(records[i].area, n);
        const auto acc = reduce(values);
        out.coefficients.push_back(acc.mean());
        out.std_errors.push_back(acc.std_error());
    }
    return out;
}

KernelEstimate lorentzian_from_theta(const Ensemble& ensemble, const Observable& f,
                                     std::optional<double> density_bound) {
    const auto records = fk_records(ensemble, f);
    density_bound_from(records, density_bound, ensemble.grid().duration());
    const Complex theta{0.0, -1.0};
    std::vector<Complex> values;
    values.reserve(records.size());
    for (const auto& r : records) {
        const Complex phase = std::exp(-theta * r.area);
        if (std::abs(std::abs(phase) - 1.0) > 1e-12)
            throw Error(ErrorKind::Numerical, "theta = -i weight lost unit modulus");
        values.push_back(r.weighted_f * phase);
    }
    auto est = finish(reduce(values), ensemble, Signature::Lorentzian);
    est.theta = theta;
    const auto direct = stochastic_path_integral(ensemble, f, Signature::Lorentzian, ActionChannel::PotentialOnly);
    if (std::abs(direct.value - est.value) > 1e-12 * std::max(1.0, std::abs(est.value)))
        throw Error(ErrorKind::Numerical, "theta = -i disagrees with the lorentzian path integral");
    return est;
}

DisintegrationResult disintegration_check(const Ensemble& ensemble, const Observable& observable,
                                          const std::vector<double>& time_weights) {
    require_samples(ensemble);
    const auto& grid = ensemble.grid();
    if (time_weights.size() != grid.nodes())
        throw Error(ErrorKind::Shape, "time weights must have one entry per grid node");
    double total = 0.0;
    for (double w : time_weights) {
        if (!(w >= 0.0)) throw Error(ErrorKind::Weight, "time weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::Weight, "time weights do not sum to 1");
    std::vector<double> cumulative(time_weights.size());
    std::partial_sum(time_weights.begin(), time_weights.end(), cumulative.begin());

    struct Record {
        Complex lhs, rhs;
    };
    const auto seed = ensemble.options().seed;
    const auto records = map_samples(ensemble, [&](std::size_t i, const Sample& s) {
        const double w = importance_weight(ensemble, s.fluctuation);
        RandomStream stream(seed, i, kTimeChannel);
        const double u = stream.uniform() * total;
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && !(cumulative[k] > u)) ++k;
        while (time_weights[k] == 0.0 && k > 0) --k;
        Record r;
        r.lhs = w * observable(s.path.points[k], grid.t[k]);
        Complex sum{0.0, 0.0};
        for (std::size_t j = 0; j < grid.nodes(); ++j)
            if (time_weights[j] != 0.0) sum += time_weights[j] * observable(s.path.points[j], grid.t[j]);
        r.rhs = w * (sum / total);
        return r;
    });
    std::vector<Complex> lhs, rhs;
    for (const auto& r : records) {
        lhs.push_back(r.lhs);
        rhs.push_back(r.rhs);
    }
    const auto a = reduce(lhs);
    const auto b = reduce(rhs);
    DisintegrationResult out;
    out.lhs = a.mean();
    out.rhs = b.mean();
    out.gap = std::abs(out.lhs - out.rhs);
    out.lhs_std_error = a.std_error();
    out.rhs_std_error = b.std_error();
    out.combined_std_error = std::hypot(out.lhs_std_error, out.rhs_std_error);
    return out;
}

PropagatorResult propagator(const MetricChart& chart, const SDEParams& params, const Vec& x, const Vec& y,
                            const PropagatorOptions& options) {
    if (!chart.is_flat()) throw Error(ErrorKind::Domain, "propagator needs a flat chart");
    if (options.samples < 1000) throw Error(ErrorKind::Domain, "propagator needs at least 1000 samples");
    if (x.size() != chart.dim() || y.size() != chart.dim())
        throw Error(ErrorKind::Shape, "endpoint dimension differs from chart dimension");

    SDEParams reference = params;
    reference.xi0 = 0.0;
    reference.xi = {};
    reference.energy_cost = false;
    reference.law = SamplingLaw::Reweighted;

    EnsembleOptions eopt;
    eopt.seed = options.seed;
    eopt.samples = options.samples;
    eopt.workers = options.workers;
    eopt.restore_gauge_orbit = true;
    auto ensemble =
        Ensemble::build(chart, x, y, options.duration, reference, eopt, options.hbar, options.trajectory);
    ensemble.spec().coercivity = options.coercivity;
    ensemble.spec().radius = options.radius ? *options.radius : default_radius(options.hbar, options.coercivity);
    ensemble.spec().validate();

    const auto& gamma0 = ensemble.trajectory();
    const auto& grid = ensemble.grid();
    const double T = grid.duration();
    const double s2 = params.sigma * params.sigma;
    std::vector<Vec> shift(grid.nodes());
    for (std::size_t k = 0; k < grid.nodes(); ++k) {
        const double s = (grid.t[k] - grid.t.front()) / T;
        shift[k] = gamma0.points[k] - (x + s * (y - x));
    }
    shift.front().setZero();
    shift.back().setZero();

    struct Record {
        Complex value;
        bool in_tube = true;
    };
    const double hbar = options.hbar;
    const auto records = map_samples(ensemble, [&](std::size_t, const Sample& s) {
        double log_cm = 0.0;
        for (std::size_t k = 0; k + 1 < grid.nodes(); ++k) {
            const Vec dh = shift[k + 1] - shift[k];
            if (dh.squaredNorm() == 0.0) continue;
            const Vec dw = (s.path.points[k + 1] - gamma0.points[k + 1]) - (s.path.points[k] - gamma0.points[k]);
            const double dt = grid.dt(k);
            log_cm -= dh.dot(dw) / (s2 * dt) + 0.5 * dh.squaredNorm() / (s2 * dt);
        }
        const double w = importance_weight(ensemble, s.fluctuation) * std::exp(log_cm);
        const double A = trapezoid(grid, euclidean_density(chart, s.path, true, hbar));
        Record r;
        r.value = w * (options.mode == Signature::Euclidean ? phase_weight(A, options.mode) : std::polar(1.0, A));
        r.in_tube = s.fluctuation.in_tube;
        return r;
    });
    std::vector<Complex> values;
    std::size_t inside = 0;
    for (const auto& r : records) {
        values.push_back(r.value);
        inside += r.in_tube ? 1 : 0;
    }
    PropagatorResult out;
    out.expectation = finish(reduce(values), ensemble, options.mode);
    out.free_kernel = heat_kernel(x, y, T, params.sigma);
    out.estimate = out.expectation;
    out.estimate.value *= out.free_kernel;
    out.estimate.std_error *= out.free_kernel;
    out.in_tube_fraction = static_cast<double>(inside) / static_cast<double>(records.size());
    if (options.chunk_size > 0) {
        for (std::size_t a = 0; a < values.size(); a += options.chunk_size) {
            const std::size_t b = std::min(values.size(), a + options.chunk_size);
            auto chunk = finish(reduce(std::vector<Complex>(values.begin() + a, values.begin() + b)), ensemble,
                                options.mode);
            chunk.value *= out.free_kernel;
            chunk.std_error *= out.free_kernel;
            out.chunks.push_back(chunk);
        }
    }
    return out;
}

}  // namespace tubepi

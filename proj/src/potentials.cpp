#include "tubepi/potentials.hpp"

#include "tubepi/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tubepi {
namespace potentials {

Potential free() { return constant(0.0); }

Potential constant(double c) {
    return {"constant", [c](const Vec&) { return c; },
            [](const Vec& q) { return Vec(Vec::Zero(q.size())); }, true};
}

Potential harmonic(double omega) {
    const double w2 = omega * omega;
    return {"harmonic", [w2](const Vec& q) { return 0.5 * w2 * q.squaredNorm(); },
            [w2](const Vec& q) { return Vec(w2 * q); }, false};
}

Potential quartic(double lambda) {
    return {"quartic", [lambda](const Vec& q) { return lambda * q.array().pow(4).sum(); },
            [lambda](const Vec& q) { return Vec(4.0 * lambda * q.array().pow(3).matrix()); }, false};
}

Potential table(std::vector<double> xs, std::vector<double> values) {
    if (xs.size() != values.size() || xs.size() < 2)
        throw Error(ErrorKind::Shape, "potential table needs matching columns with at least two rows");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (!(xs[i + 1] > xs[i])) throw Error(ErrorKind::Shape, "potential table x must be increasing");
    auto locate = [xs](double x) {
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t i = static_cast<std::size_t>(std::distance(xs.begin(), it));
        return std::clamp<std::size_t>(i, 1, xs.size() - 1) - 1;
    };
    auto value = [xs, values, locate](const Vec& q) {
        const double x = q[0];
        if (x <= xs.front()) return values.front();
        if (x >= xs.back()) return values.back();
        const std::size_t i = locate(x);
        const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
        return (1.0 - w) * values[i] + w * values[i + 1];
    };
    auto gradient = [xs, values, locate](const Vec& q) {
        Vec g = Vec::Zero(q.size());
        const double x = q[0];
        if (x <= xs.front() || x >= xs.back()) return g;
        const std::size_t i = locate(x);
        g[0] = (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
        return g;
    };
    return {"table", value, gradient, false};
}

}  // namespace potentials

namespace metrics {

MetricField conformal(double alpha) {
    return [alpha](const Vec& q) {
        return Mat(std::exp(2.0 * alpha * q.sum()) * Mat::Identity(q.size(), q.size()));
    };
}

}  // namespace metrics

MetricChart make_flat_chart(int dim, const Potential& potential) {
    return MetricChart::flat(dim, potential.value, potential.gradient);
}

MetricChart make_user_chart(int dim, MetricField metric, const Potential& potential,
                            double injectivity_radius) {
    return MetricChart::user(dim, std::move(metric), potential.value, potential.gradient,
                             injectivity_radius);
}

}  // namespace tubepi

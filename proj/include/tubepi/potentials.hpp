#pragma once

#include "tubepi/geometry.hpp"

#include <string>
#include <vector>

namespace tubepi {

struct Potential {
    std::string name;
    ScalarField value;
    VectorField gradient;
    // True when V is the same constant everywhere.
    bool constant = false;
};

namespace potentials {

Potential free();
Potential constant(double c);
// 1/2 omega^2 |q|^2
Potential harmonic(double omega);
// lambda sum_i q_i^4
Potential quartic(double lambda);
// Piecewise-linear 1-D table, constant extrapolation outside [x_front, x_back].
Potential table(std::vector<double> xs, std::vector<double> values);

}  // namespace potentials

namespace metrics {

// g(q) = exp(2 alpha sum_i q_i) I
MetricField conformal(double alpha);

}  // namespace metrics

MetricChart make_flat_chart(int dim, const Potential& potential);
MetricChart make_user_chart(int dim, MetricField metric, const Potential& potential,
                            double injectivity_radius = std::numeric_limits<double>::infinity());

}  // namespace tubepi

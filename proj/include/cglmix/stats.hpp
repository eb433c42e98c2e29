#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cglmix {

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
    double sd = 0.0;
    std::size_t n = 0;
};

MeanSE mean_se(std::span<const double> x);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_se = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope x; needs two distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Linear-interpolated quantile of a copy of x, q in [0, 1].
double quantile(std::vector<double> x, double q);
double median(std::vector<double> x);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval for k successes in n trials.
Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

}  // namespace cglmix

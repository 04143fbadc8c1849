#pragma once

#include <span>
#include <vector>

namespace sband::stats {

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

/// Two-sided standard normal critical value z_{1-alpha/2}.
double z_two_sided(double alpha);

/// Order statistic at index ceil(level * B) (1-based) of an already sorted sample.
double order_quantile(std::span<const double> sorted, double level);

/// Asymptotic Monte Carlo standard error of a sample quantile:
/// sqrt(level (1 - level) / B) / f(q), with f a Gaussian kernel density estimate at q.
double quantile_mc_se(std::span<const double> sorted, double level, double q);

/// Empirical quantile with linear interpolation between order statistics
/// (the common "type 7" definition).
double interpolated_quantile(std::span<const double> sorted, double level);

}  // namespace sband::stats

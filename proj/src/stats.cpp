#include "sband/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "sband/errors.hpp"

namespace sband::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("normal_quantile: probability must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double z_two_sided(double alpha) { return normal_quantile(1.0 - alpha / 2.0); }

namespace {

// ceil with slack so that e.g. 0.95 * 1000 lands on 950 rather than 951
std::size_t quantile_rank(std::size_t count, double level) {
  const double raw = level * static_cast<double>(count);
  auto rank = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(rank, 1, count);
}

}  // namespace

double order_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw InputError("order_quantile: empty sample");
  return sorted[quantile_rank(sorted.size(), level) - 1];
}

double interpolated_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw InputError("interpolated_quantile: empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile_mc_se(std::span<const double> sorted, double level, double q) {
  const auto count = static_cast<double>(sorted.size());
  if (sorted.size() < 2) throw InputError("quantile_mc_se: need at least two draws");

  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (count - 1.0));
  const double iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  const double bandwidth = 0.9 * spread * std::pow(count, -0.2);

  double density = 0.0;
  if (bandwidth > 0.0) {
    // kernel mass beyond 8 bandwidths is negligible
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), q - 8.0 * bandwidth);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), q + 8.0 * bandwidth);
    for (auto it = lo; it != hi; ++it) density += normal_pdf((q - *it) / bandwidth);
    density /= count * bandwidth;
  }

  const double binomial_sd = std::sqrt(level * (1.0 - level) / count);
  if (density > 0.0 && std::isfinite(density)) return binomial_sd / density;

  // degenerate sample: fall back to the binomial order-statistic interval
  const double lo_level = std::max(0.0, level - 1.96 * binomial_sd);
  const double hi_level = std::min(1.0, level + 1.96 * binomial_sd);
  const double width = order_quantile(sorted, hi_level) - order_quantile(sorted, lo_level);
  return std::max(width / (2.0 * 1.96), std::numeric_limits<double>::min());
}

}  // namespace sband::stats

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sband/series_fit.hpp"

namespace sband {

enum class CriticalMethod { gaussian_sim, nested_se_ratio, weighted_bootstrap };

std::string to_string(CriticalMethod method);

struct CriticalValueResult {
  double c_hat = 0.0;
  double alpha = 0.05;
  int draws = 0;
  double mc_se = 0.0;
  std::uint64_t seed = 0;
  CriticalMethod method = CriticalMethod::gaussian_sim;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double v) const { return lower <= v && v <= upper; }
  bool contains(const Interval& other) const { return lower <= other.lower && other.upper <= upper; }
  double length() const { return upper - lower; }
};

/// Throws InputError when `sigma` is not a correlation matrix up to the clipping tolerance.
void check_correlation(const Eigen::MatrixXd& sigma);

/// (1 - alpha) quantile of max_j |Z_j|, Z ~ N(0, Sigma), over `draws` replications.
/// Each replication b draws from the stream (seed, b), so the result is independent of `threads`.
CriticalValueResult pointwise_critical_value(const CrossKCorrelation& sigma, double alpha, int draws,
                                             std::uint64_t seed, unsigned threads = 1,
                                             CriticalMethod method = CriticalMethod::gaussian_sim);
CriticalValueResult pointwise_critical_value(const Eigen::MatrixXd& sigma, double alpha, int draws,
                                             std::uint64_t seed, unsigned threads = 1,
                                             CriticalMethod method = CriticalMethod::gaussian_sim);

/// The per-replication maxima behind pointwise_critical_value, in replication order.
std::vector<double> gaussian_max_draws(const Eigen::MatrixXd& sigma, int draws, std::uint64_t seed,
                                       unsigned threads = 1);

/// Correlation of nested homoskedastic LS estimates from their standard errors:
/// Sigma(j,l) = min(SE_j, SE_l) / max(SE_j, SE_l).
CrossKCorrelation nested_homoskedastic_corr(std::span<const double> ses);

/// [estimate - c se, estimate + c se].
Interval robust_ci(double estimate, double se, double c);

struct BootstrapWeights {
  std::vector<double> e;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// i.i.d. standard exponential weights from stream (seed, stream).
BootstrapWeights exponential_weights(std::size_t n, std::uint64_t seed, std::uint64_t stream);

/// sup over K x grid of |sqrt(n) (g_e(K,x) - g(K,x))| / sqrt(V(K,x)) for each replication,
/// with V from the original fits. Replication b uses weights exponential_weights(n, seed, b).
std::vector<double> bootstrap_sup_statistics(const Dataset& data, std::span<const FitResult> fits,
                                             std::span<const double> grid, int draws, std::uint64_t seed,
                                             unsigned threads = 1);

/// Weighted-bootstrap critical value for bands uniform in K and x.
CriticalValueResult uniform_band_critical_value(const Dataset& data, std::span<const FitResult> fits,
                                                std::span<const double> grid, double alpha, int draws,
                                                std::uint64_t seed, unsigned threads = 1);

/// Quantile and Monte Carlo standard error from a sample of statistics.
CriticalValueResult critical_value_from_draws(std::vector<double> draws, double alpha, std::uint64_t seed,
                                              CriticalMethod method);

struct Band {
  std::vector<double> grid;
  std::vector<double> center;
  std::vector<double> half_width;
  int k_used = 0;
  double c_used = 0.0;

  bool covers(std::span<const double> truth) const;
  double average_width() const;
};

/// center = g_hat(K, grid), half_width = c sqrt(V_hat(K, grid) / n).
Band make_band(const FitResult& fit, std::span<const double> grid, double c);

/// `count` evenly spaced points from lower to upper inclusive.
std::vector<double> even_grid(double lower, double upper, int count);

}  // namespace sband

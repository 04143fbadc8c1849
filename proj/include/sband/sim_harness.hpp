#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sband/basis.hpp"
#include "sband/candidate_set.hpp"
#include "sband/series_fit.hpp"

namespace sband::sim {

/// Regression functions of the three coverage designs on [0, 1].
double g1(double x);
double g2(double x);
double g3(double x);
double true_function(int model_id, double x);

/// x = Phi(x*), x* ~ N(0,1); e ~ N(0, sigma^2(x*)) with sigma^2 = ((1 + 2x*)/2)^2 when
/// heteroskedastic, 1 otherwise; y = scale (g(x) + e).
Dataset dgp_sample(int model_id, std::size_t n, bool heteroskedastic, std::uint64_t seed, double scale = 1.0);

struct SimConfig {
  int model_id = 1;
  std::size_t n = 200;
  int n_reps = 2000;
  int b_critical = 1000;
  int b_bootstrap = 1000;
  double alpha = 0.05;
  CandidateRule candidate_rule = CandidateRule::simulation_rule;
  std::vector<int> explicit_k{};
  std::vector<double> eval_points{0.2, 0.5, 0.8, 0.9};
  Support band_support{0.05, 0.95};
  int band_grid_size = 91;
  bool heteroskedastic = true;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;
  bool tolerate_failures = false;
  double scale = 1.0;
  int spline_order = 3;
  bool uniform_bands = true;

  void validate() const;
};

inline const std::vector<std::string> kMethods{"standard", "robust_cv", "robust_cv_plus"};

/// Outcome of one replication. Indexing: [method][eval point] for pointwise results,
/// [method] for bands, with methods ordered as kMethods.
struct ReplicationOutcome {
  int replication = 0;
  int k_cv = 0;
  int k_cv_plus = 0;
  bool cv_plus_clipped = false;
  std::vector<double> pointwise_c;              // c_hat(x) per eval point
  std::vector<std::vector<bool>> covered;       // [method][point]
  std::vector<std::vector<double>> length;      // [method][point]
  double band_c = 0.0;
  std::vector<bool> band_covered;               // [method]
  std::vector<double> band_width;               // [method], grid-average full width
};

struct SummaryRow {
  std::string method;
  std::string target;  // "x=0.5" or "uniform"
  double coverage = 0.0;
  double avg_length = 0.0;
};

struct Failure {
  int replication = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct SimReport {
  SimConfig config;
  std::vector<int> k_values;
  std::vector<SummaryRow> rows;
  std::map<int, int> k_cv_histogram;
  int completed = 0;
  std::vector<Failure> failures;
  double seconds = 0.0;
  std::vector<ReplicationOutcome> replications;

  const SummaryRow& row(const std::string& method, const std::string& target) const;
};

std::string point_label(double x);

/// Seed of replication r's data stream.
std::uint64_t replication_seed(std::uint64_t master_seed, int replication);

ReplicationOutcome run_replication(const SimConfig& config, int replication);

/// Runs all replications (in parallel over `config.threads`) and aggregates coverage and length.
SimReport run_coverage_study(const SimConfig& config);

}  // namespace sband::sim

#include "sband/sim_harness.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "sband/errors.hpp"
#include "sband/random.hpp"
#include "sband/stats.hpp"
#include "sband/suptstat.hpp"

namespace sband::sim {

namespace {

double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

double g1(double x) { return std::log(std::abs(6.0 * x - 3.0) + 1.0) * sgn(x - 0.5); }

double g2(double x) {
  return std::sin(7.0 * std::numbers::pi * x / 2.0) / (1.0 + 2.0 * x * x * (sgn(x) + 1.0));
}

double g3(double x) { return x - 0.5 + 5.0 * stats::normal_pdf(10.0 * (x - 0.5)); }

double true_function(int model_id, double x) {
  switch (model_id) {
    case 1: return g1(x);
    case 2: return g2(x);
    case 3: return g3(x);
    default: throw InputError("unknown model id " + std::to_string(model_id) + " (expected 1, 2 or 3)");
  }
}

Dataset dgp_sample(int model_id, std::size_t n, bool heteroskedastic, std::uint64_t seed, double scale) {
  if (model_id < 1 || model_id > 3)
    throw InputError("unknown model id " + std::to_string(model_id) + " (expected 1, 2 or 3)");
  if (n < 2) throw InputError("simulated sample size must be at least 2");
  Engine engine = make_engine(seed, 0);
  std::normal_distribution<double> normal;
  Dataset data;
  data.x.resize(n);
  data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double latent = normal(engine);
    const double noise = normal(engine);
    const double sd = heteroskedastic ? std::abs((1.0 + 2.0 * latent) / 2.0) : 1.0;
    data.x[i] = stats::normal_cdf(latent);
    data.y[i] = scale * (true_function(model_id, data.x[i]) + sd * noise);
  }
  return data;
}

void SimConfig::validate() const {
  if (model_id < 1 || model_id > 3) throw InputError("model must be 1, 2 or 3");
  if (n < 2) throw InputError("sample size must be at least 2");
  if (n_reps < 1) throw InputError("number of replications must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (b_critical < 100 || b_bootstrap < 100) throw InputError("critical-value draws must be at least 100");
  if (eval_points.empty()) throw InputError("need at least one evaluation point");
  for (double x : eval_points)
    if (!(x > 0.0 && x < 1.0)) throw InputError("evaluation points must lie in (0, 1)");
  if (!(band_support.lower >= 0.0 && band_support.upper <= 1.0 && band_support.lower < band_support.upper))
    throw InputError("band support must be an increasing interval inside [0, 1]");
  if (band_grid_size < 2) throw InputError("band grid needs at least two points");
  if (!(scale > 0.0)) throw InputError("scale must be positive");
  if (spline_order < 1) throw InputError("spline order must be at least 1");
}

const SummaryRow& SimReport::row(const std::string& method, const std::string& target) const {
  for (const auto& r : rows)
    if (r.method == method && r.target == target) return r;
  throw InputError("no summary row for " + method + " / " + target);
}

std::string point_label(double x) {
  std::ostringstream out;
  out << "x=" << x;
  return out.str();
}

std::uint64_t replication_seed(std::uint64_t master_seed, int replication) {
  return stream_seed(master_seed, static_cast<std::uint64_t>(replication));
}

ReplicationOutcome run_replication(const SimConfig& config, int replication) {
  const std::uint64_t rep_seed = replication_seed(config.master_seed, replication);
  const Dataset data = dgp_sample(config.model_id, config.n, config.heteroskedastic, rep_seed, config.scale);

  CandidateParams params;
  params.explicit_k = config.explicit_k;
  const CandidateSet set = build_candidate_set(config.candidate_rule, config.n, params);

  BasisSpec spec;
  spec.family = BasisFamily::spline;
  spec.spline_order = config.spline_order;
  spec.support = {0.0, 1.0};
  spec.knot_rule = KnotRule::evenly_spaced;

  const auto fits = fit_candidates(data, set, spec);
  const Selection selection = select_cv(fits);
  auto find_fit = [&](int k) -> const FitResult* {
    for (std::size_t j = 0; j < set.p(); ++j)
      if (set.k_values[j] == k) return &fits[j];
    return nullptr;
  };
  const FitResult& fit_cv = *find_fit(selection.k_cv);
  // explicit lists need not contain K_cv + 2; fit it separately then (c_hat still comes from the set)
  std::optional<FitResult> extra_plus;
  const FitResult* plus_ptr = find_fit(selection.k_cv_plus());
  if (plus_ptr == nullptr) plus_ptr = &extra_plus.emplace(fit(data, spec.with_k(selection.k_cv_plus())));
  const FitResult& fit_plus = *plus_ptr;

  ReplicationOutcome out;
  out.replication = replication;
  out.k_cv = selection.k_cv;
  out.k_cv_plus = selection.k_cv_plus();
  out.cv_plus_clipped = selection.cv_plus_clipped;
  out.covered.assign(kMethods.size(), {});
  out.length.assign(kMethods.size(), {});

  const double z = stats::z_two_sided(config.alpha);
  for (std::size_t j = 0; j < config.eval_points.size(); ++j) {
    const double x = config.eval_points[j];
    const double truth = config.scale * true_function(config.model_id, x);
    const CrossKCorrelation sigma = cross_k_correlation_at(fits, x);
    const CriticalValueResult crit =
        pointwise_critical_value(sigma, config.alpha, config.b_critical, stream_seed(rep_seed, 1 + j));
    out.pointwise_c.push_back(crit.c_hat);

    const double est_cv = predict(fit_cv, std::span<const double>(&x, 1))[0];
    const double est_plus = predict(fit_plus, std::span<const double>(&x, 1))[0];
    const double se_cv = standard_error(fit_cv, basis_row(fit_cv.basis_spec, x));
    const double se_plus = standard_error(fit_plus, basis_row(fit_plus.basis_spec, x));
    const Interval intervals[] = {robust_ci(est_cv, se_cv, z), robust_ci(est_cv, se_cv, crit.c_hat),
                                  robust_ci(est_plus, se_plus, crit.c_hat)};
    for (std::size_t m = 0; m < kMethods.size(); ++m) {
      out.covered[m].push_back(intervals[m].contains(truth));
      out.length[m].push_back(intervals[m].length());
    }
  }

  if (config.uniform_bands) {
    const auto grid = even_grid(config.band_support.lower, config.band_support.upper, config.band_grid_size);
    std::vector<double> truth(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) truth[g] = config.scale * true_function(config.model_id, grid[g]);
    const CriticalValueResult band_crit = uniform_band_critical_value(
        data, fits, grid, config.alpha, config.b_bootstrap, stream_seed(rep_seed, 1000));
    out.band_c = band_crit.c_hat;
    const Band bands[] = {make_band(fit_cv, grid, z), make_band(fit_cv, grid, band_crit.c_hat),
                          make_band(fit_plus, grid, band_crit.c_hat)};
    for (const auto& band : bands) {
      out.band_covered.push_back(band.covers(truth));
      out.band_width.push_back(band.average_width());
    }
  }
  return out;
}

SimReport run_coverage_study(const SimConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  CandidateParams params;
  params.explicit_k = config.explicit_k;

  SimReport report;
  report.config = config;
  report.k_values = build_candidate_set(config.candidate_rule, config.n, params).k_values;

  std::vector<std::optional<ReplicationOutcome>> outcomes(static_cast<std::size_t>(config.n_reps));
  std::vector<std::optional<Failure>> failures(outcomes.size());
  parallel_for(outcomes.size(), config.threads, [&](std::size_t r) {
    const int rep = static_cast<int>(r);
    if (!config.tolerate_failures) {
      outcomes[r] = run_replication(config, rep);
      return;
    }
    try {
      outcomes[r] = run_replication(config, rep);
    } catch (const std::exception& e) {
      failures[r] = Failure{rep, replication_seed(config.master_seed, rep), e.what()};
    }
  });

  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (failures[r]) report.failures.push_back(*failures[r]);
    if (outcomes[r]) {
      report.k_cv_histogram[outcomes[r]->k_cv] += 1;
      report.replications.push_back(std::move(*outcomes[r]));
    }
  }
  report.completed = static_cast<int>(report.replications.size());
  if (report.completed == 0) throw NumericalError("every simulation replication failed");

  const auto count = static_cast<double>(report.completed);
  for (std::size_t m = 0; m < kMethods.size(); ++m) {
    for (std::size_t j = 0; j < config.eval_points.size(); ++j) {
      double hits = 0.0, length = 0.0;
      for (const auto& rep : report.replications) {
        hits += rep.covered[m][j] ? 1.0 : 0.0;
        length += rep.length[m][j];
      }
      report.rows.push_back({kMethods[m], point_label(config.eval_points[j]), hits / count, length / count});
    }
    if (config.uniform_bands) {
      double hits = 0.0, width = 0.0;
      for (const auto& rep : report.replications) {
        hits += rep.band_covered[m] ? 1.0 : 0.0;
        width += rep.band_width[m];
      }
      report.rows.push_back({kMethods[m], "uniform", hits / count, width / count});
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace sband::sim

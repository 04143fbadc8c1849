#include "sband/report.hpp"

#include <iomanip>

namespace sband {

namespace {

void write_preamble(std::ostream& out, const CsvPreamble& preamble) {
  for (const auto& [key, value] : preamble) out << "# " << key << '=' << value << '\n';
}

}  // namespace

Json to_json(const CriticalValueResult& result) {
  return Json{{"c_hat", result.c_hat},   {"alpha", result.alpha}, {"draws", result.draws},
              {"mc_se", result.mc_se},   {"seed", result.seed},   {"method", to_string(result.method)}};
}

Json to_json(const Band& band) {
  return Json{{"grid", band.grid},
              {"center", band.center},
              {"half_width", band.half_width},
              {"k_used", band.k_used},
              {"c_used", band.c_used}};
}

Json to_json(const Interval& interval) { return Json::array({interval.lower, interval.upper}); }

Json to_json(const CrossKCorrelation& sigma) {
  Json rows = Json::array();
  for (Eigen::Index j = 0; j < sigma.sigma_hat.rows(); ++j) {
    Json row = Json::array();
    for (Eigen::Index l = 0; l < sigma.sigma_hat.cols(); ++l) row.push_back(sigma.sigma_hat(j, l));
    rows.push_back(std::move(row));
  }
  return Json{{"sigma_hat", std::move(rows)},
              {"k_values", sigma.k_values},
              {"point_variances", sigma.point_variances},
              {"evaluation", sigma.evaluation}};
}

Json to_json(const PlmRobustResult& result) {
  Json per_k = Json::array();
  for (const auto& row : result.intervals) {
    per_k.push_back(Json{{"K", row.k},
                         {"theta_hat", row.theta_hat},
                         {"se_hc0", row.se_hc0},
                         {"se_cross_term", row.se_cross_term},
                         {"ci_standard", to_json(row.ci_standard)},
                         {"ci_robust", to_json(row.ci_robust)}});
  }
  const Json sigma = to_json(result.sigma);
  return Json{{"per_k", std::move(per_k)},
              {"c_hat", result.critical.c_hat},
              {"alpha", result.critical.alpha},
              {"B", result.critical.draws},
              {"seed", result.critical.seed},
              {"mc_se", result.critical.mc_se},
              {"sigma_hat", sigma["sigma_hat"]}};
}

Json to_json(const sim::SimConfig& config) {
  return Json{{"model_id", config.model_id},
              {"n", config.n},
              {"n_reps", config.n_reps},
              {"B_critical", config.b_critical},
              {"B_bootstrap", config.b_bootstrap},
              {"alpha", config.alpha},
              {"candidate_rule", to_string(config.candidate_rule)},
              {"explicit_k", config.explicit_k},
              {"eval_points", config.eval_points},
              {"band_support", Json::array({config.band_support.lower, config.band_support.upper})},
              {"band_grid_size", config.band_grid_size},
              {"heteroskedastic", config.heteroskedastic},
              {"master_seed", config.master_seed},
              {"tolerate_failures", config.tolerate_failures},
              {"scale", config.scale},
              {"spline_order", config.spline_order},
              {"uniform_bands", config.uniform_bands}};
}

Json to_json(const sim::SimReport& report, bool include_replications) {
  Json rows = Json::array();
  for (const auto& row : report.rows)
    rows.push_back(Json{{"method", row.method},
                        {"target", row.target},
                        {"coverage", row.coverage},
                        {"avg_length", row.avg_length}});
  Json histogram = Json::object();
  for (const auto& [k, count] : report.k_cv_histogram) histogram[std::to_string(k)] = count;
  Json failures = Json::array();
  for (const auto& f : report.failures)
    failures.push_back(Json{{"replication", f.replication}, {"seed", f.seed}, {"message", f.message}});

  Json out{{"config", to_json(report.config)},
           {"k_values", report.k_values},
           {"summary", std::move(rows)},
           {"k_cv_histogram", std::move(histogram)},
           {"completed", report.completed},
           {"failures", std::move(failures)},
           {"seconds", report.seconds}};
  if (include_replications) {
    Json reps = Json::array();
    for (const auto& rep : report.replications) {
      Json covered = Json::object();
      Json length = Json::object();
      Json band_covered = Json::object();
      for (std::size_t m = 0; m < sim::kMethods.size() && m < rep.covered.size(); ++m) {
        covered[sim::kMethods[m]] = std::vector<bool>(rep.covered[m]);
        length[sim::kMethods[m]] = rep.length[m];
        if (m < rep.band_covered.size()) band_covered[sim::kMethods[m]] = static_cast<bool>(rep.band_covered[m]);
      }
      reps.push_back(Json{{"replication", rep.replication},
                          {"k_cv", rep.k_cv},
                          {"k_cv_plus", rep.k_cv_plus},
                          {"cv_plus_clipped", rep.cv_plus_clipped},
                          {"pointwise_c", rep.pointwise_c},
                          {"covered", std::move(covered)},
                          {"length", std::move(length)},
                          {"band_c", rep.band_c},
                          {"band_covered", std::move(band_covered)}});
    }
    out["replications"] = std::move(reps);
  }
  return out;
}

void write_band_csv(std::ostream& out, const Band& band, const CsvPreamble& preamble) {
  write_preamble(out, preamble);
  out << "x,center,lower,upper\n";
  out << std::setprecision(17);
  for (std::size_t g = 0; g < band.grid.size(); ++g)
    out << band.grid[g] << ',' << band.center[g] << ',' << band.center[g] - band.half_width[g] << ','
        << band.center[g] + band.half_width[g] << '\n';
}

void write_coverage_csv(std::ostream& out, const sim::SimReport& report, const CsvPreamble& preamble) {
  write_preamble(out, preamble);
  out << "model,method,target,coverage,avg_length\n";
  out << std::setprecision(10);
  for (const auto& row : report.rows)
    out << report.config.model_id << ',' << row.method << ',' << row.target << ',' << row.coverage << ','
        << row.avg_length << '\n';
}

}  // namespace sband

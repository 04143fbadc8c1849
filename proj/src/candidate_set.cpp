#include "sband/candidate_set.hpp"

#include <algorithm>
#include <cmath>

#include "sband/errors.hpp"
#include "sband/random.hpp"

namespace sband {

namespace {

// ceil with slack for values that should be exact integers (e.g. 2 * 125^{1/3})
int ceil_int(double v) { return static_cast<int>(std::ceil(v - 1e-9)); }

std::vector<int> integer_range(int lo, int hi) {
  std::vector<int> out;
  for (int k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

}  // namespace

std::string to_string(CandidateRule rule) {
  switch (rule) {
    case CandidateRule::simulation_rule: return "simulation_rule";
    case CandidateRule::cv_anchored: return "cv_anchored";
    case CandidateRule::explicit_list: break;
  }
  return "explicit";
}

CandidateRule parse_candidate_rule(const std::string& text) {
  if (text == "sim" || text == "simulation_rule") return CandidateRule::simulation_rule;
  if (text == "cv-anchored" || text == "cv_anchored") return CandidateRule::cv_anchored;
  if (text == "explicit" || text == "list") return CandidateRule::explicit_list;
  throw InputError("unknown candidate rule '" + text + "'");
}

CandidateSet build_candidate_set(CandidateRule rule, std::size_t n, const CandidateParams& params) {
  if (n < 2) throw InputError("candidate set needs a sample size of at least 2");
  CandidateSet set;
  set.rule = rule;
  const auto nd = static_cast<double>(n);
  switch (rule) {
    case CandidateRule::simulation_rule:
      set.k_values = integer_range(ceil_int(2.0 * std::pow(nd, 0.2)), ceil_int(2.0 * std::cbrt(nd)));
      break;
    case CandidateRule::cv_anchored: {
      if (!params.k_cv) throw InputError("cv_anchored rule requires the cross-validated K");
      if (!(params.c1 > 1.0)) throw InputError("cv_anchored multiplier c1 must exceed 1");
      if (*params.k_cv < 0) throw InputError("cross-validated K must be nonnegative");
      set.k_values = integer_range(*params.k_cv, ceil_int(params.c1 * *params.k_cv));
      break;
    }
    case CandidateRule::explicit_list:
      set.k_values = params.explicit_k;
      for (std::size_t j = 1; j < set.k_values.size(); ++j)
        if (set.k_values[j] <= set.k_values[j - 1])
          throw InputError("explicit candidate list must be strictly increasing");
      if (!set.k_values.empty() && set.k_values.front() < 0)
        throw InputError("candidate K values must be nonnegative");
      break;
  }
  if (set.k_values.empty()) throw InputError("candidate set is empty");
  return set;
}

Selection select_from_scores(std::span<const std::pair<int, double>> scores) {
  if (scores.empty()) throw InputError("no cross-validation scores to select from");
  Selection out;
  for (const auto& [k, score] : scores) {
    if (!std::isfinite(score)) throw NumericalError("non-finite cross-validation score", k);
    out.cv_scores[k] = score;
  }
  // std::map iterates in increasing K, so strict < keeps the smallest K on ties
  auto best = out.cv_scores.begin();
  for (auto it = out.cv_scores.begin(); it != out.cv_scores.end(); ++it)
    if (it->second < best->second) best = it;
  out.k_cv = best->first;
  const int k_max = out.cv_scores.rbegin()->first;
  out.cv_plus_unclipped = out.k_cv + 2;
  out.cv_plus_clipped = out.cv_plus_unclipped > k_max;
  out.bumped["cv+"] = std::min(out.cv_plus_unclipped, k_max);
  return out;
}

Selection select_cv(std::span<const FitResult> fits) {
  std::vector<std::pair<int, double>> scores;
  scores.reserve(fits.size());
  for (const auto& f : fits) scores.emplace_back(f.k, loo_cv(f));
  return select_from_scores(scores);
}

std::vector<FitResult> fit_candidates(const Dataset& data, const CandidateSet& set, const BasisSpec& spec_template,
                                      unsigned threads) {
  std::vector<FitResult> fits(set.p());
  parallel_for(set.p(), threads, [&](std::size_t j) { fits[j] = fit(data, spec_template.with_k(set.k_values[j])); });
  return fits;
}

Selection select_cv(const Dataset& data, const CandidateSet& set, const BasisSpec& spec_template) {
  const auto fits = fit_candidates(data, set, spec_template);
  return select_cv(fits);
}

}  // namespace sband

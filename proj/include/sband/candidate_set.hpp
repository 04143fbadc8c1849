#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sband/series_fit.hpp"

namespace sband {

enum class CandidateRule { explicit_list, simulation_rule, cv_anchored };

std::string to_string(CandidateRule rule);
CandidateRule parse_candidate_rule(const std::string& text);

/// The finite set of series-term counts searched over.
struct CandidateSet {
  std::vector<int> k_values;  // strictly increasing
  CandidateRule rule = CandidateRule::explicit_list;

  std::size_t p() const { return k_values.size(); }
  int lower() const { return k_values.front(); }
  int upper() const { return k_values.back(); }
  bool operator==(const CandidateSet&) const = default;
};

struct CandidateParams {
  std::vector<int> explicit_k{};  // explicit_list
  std::optional<int> k_cv{};      // cv_anchored anchor
  double c1 = 2.0;                // cv_anchored multiplier, > 1
};

/// simulation_rule: all integers in [ceil(2 n^{1/5}), ceil(2 n^{1/3})];
/// cv_anchored: integers in [k_cv, ceil(c1 k_cv)]; explicit_list: validated passthrough.
CandidateSet build_candidate_set(CandidateRule rule, std::size_t n, const CandidateParams& params = {});

struct Selection {
  int k_cv = 0;
  std::map<int, double> cv_scores;
  std::map<std::string, int> bumped;  // "cv+" -> clipped K_cv + 2
  int cv_plus_unclipped = 0;
  bool cv_plus_clipped = false;

  int k_cv_plus() const { return bumped.at("cv+"); }
};

/// argmin of the scores with ties going to the smaller K; order of the input is irrelevant.
Selection select_from_scores(std::span<const std::pair<int, double>> scores);

/// Fits every K in the set and selects by leave-one-out CV.
Selection select_cv(const Dataset& data, const CandidateSet& set, const BasisSpec& spec_template);

/// Selection from fits already computed for every K in the set.
Selection select_cv(std::span<const FitResult> fits);

/// One fit per K in the set, in set order. Errors carry the offending K.
std::vector<FitResult> fit_candidates(const Dataset& data, const CandidateSet& set, const BasisSpec& spec_template,
                                      unsigned threads = 1);

}  // namespace sband

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sband/basis.hpp"
#include "sband/series_fit.hpp"
#include "sband/suptstat.hpp"

namespace sband {

/// Partialling-out fit of y = theta w + g(x) + e with series controls for g.
struct PlmFit {
  double theta_hat = 0.0;
  int k = 0;
  Eigen::Index n = 0;
  Eigen::VectorXd m_diag;   // diagonal of M_K = I - P (P'P)^{-1} P'
  Eigen::VectorXd v_hat;    // M_K W
  Eigen::VectorXd eps_hat;  // M_K (Y - W theta_hat)
  double gamma_hat = 0.0;   // W' M_K W / n
  Eigen::MatrixXd control_q;  // orthonormal basis of the control column space
  std::string controls;       // descriptor of the control basis

  /// Row i of M_K, materialized on demand.
  Eigen::VectorXd annihilator_row(Eigen::Index i) const;
};

/// Smallest admissible annihilator diagonal.
inline constexpr double kAnnihilatorFloor = 0.01;

/// Requires data.w. `k` labels the controls (the tuning parameter that produced them).
PlmFit plm_fit(const Dataset& data, const Eigen::MatrixXd& controls, int k, std::string descriptor = {});
PlmFit plm_fit(const Dataset& data, const BasisMatrix& controls, int k, std::string descriptor = {});

enum class KappaMode { hc0, cross_term_full };

std::string to_string(KappaMode mode);
KappaMode parse_kappa_mode(const std::string& text);

struct PlmVariance {
  double v_hat_n = 0.0;    // Gamma^{-1} Omega Gamma^{-1}
  double omega_hat = 0.0;
  double se = 0.0;         // sqrt(v_hat_n / n)
  KappaMode kappa_mode = KappaMode::hc0;
};

/// hc0: Omega = (1/n) sum v_i^2 e_i^2.
/// cross_term_full: Omega = (1/n) sum_i sum_j M_ij^2 v_i^2 e_j^2.
PlmVariance plm_variance(const PlmFit& fit, KappaMode mode = KappaMode::hc0);

/// Cross-K correlation of the theta t-statistics with
/// Omega(l,l') = (1/n) sum_ij M_{l,ij} M_{l',ij} (v_{l,i} v_{l',i}) (e_{l,j} e_{l',j}).
CrossKCorrelation plm_cross_corr(std::span<const PlmFit> fits, unsigned threads = 1);

struct PlmInterval {
  int k = 0;
  double theta_hat = 0.0;
  double se_hc0 = 0.0;
  double se_cross_term = 0.0;
  Interval ci_standard;
  Interval ci_robust;
};

struct PlmRobustResult {
  std::vector<PlmInterval> intervals;
  CriticalValueResult critical;
  CrossKCorrelation sigma;
};

/// Intervals theta_hat(K) +- c_hat SE(K) with c_hat simulated from plm_cross_corr(fits).
/// Standard intervals use z_{1-alpha/2}; both use the SE of `se_mode`.
PlmRobustResult plm_robust_ci(std::span<const PlmFit> fits, double alpha, int draws, std::uint64_t seed,
                              unsigned threads = 1, KappaMode se_mode = KappaMode::hc0);

}  // namespace sband

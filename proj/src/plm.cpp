#include "sband/plm.hpp"

#include <cmath>

#include "sband/errors.hpp"
#include "sband/random.hpp"
#include "sband/stats.hpp"

namespace sband {

Eigen::VectorXd PlmFit::annihilator_row(Eigen::Index i) const {
  Eigen::VectorXd row = -(control_q * control_q.row(i).transpose());
  row(i) += 1.0;
  return row;
}

PlmFit plm_fit(const Dataset& data, const Eigen::MatrixXd& controls, int k, std::string descriptor) {
  data.validate();
  if (!data.w) throw InputError("partially linear model needs a w column");
  const auto n = static_cast<Eigen::Index>(data.size());
  if (controls.rows() != n) throw InputError("control matrix rows do not match the sample size");
  if (n <= controls.cols() + 1)
    throw InputError("need more observations than controls + 1 for K=" + std::to_string(k));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(controls);
  qr.setThreshold(1e-10);
  if (qr.rank() < controls.cols()) throw NumericalError("control basis is numerically rank deficient", k);

  PlmFit out;
  out.k = k;
  out.n = n;
  out.controls = std::move(descriptor);
  out.control_q = qr.householderQ() * Eigen::MatrixXd::Identity(n, controls.cols());
  out.m_diag = Eigen::VectorXd::Ones(n) - out.control_q.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i)
    if (out.m_diag(i) < kAnnihilatorFloor)
      throw NumericalError("annihilator diagonal M_ii=" + std::to_string(out.m_diag(i)) + " below floor " +
                               std::to_string(kAnnihilatorFloor) + " at observation " + std::to_string(i),
                           k);

  const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), n);
  const Eigen::Map<const Eigen::VectorXd> w(data.w->data(), n);
  auto annihilate = [&](const auto& v) -> Eigen::VectorXd {
    return v - out.control_q * (out.control_q.transpose() * v);
  };
  out.v_hat = annihilate(w);
  const Eigen::VectorXd my = annihilate(y);
  const double vv = out.v_hat.squaredNorm();
  if (!(vv > 1e-12 * std::max(1.0, w.squaredNorm())))
    throw NumericalError("w is (numerically) in the span of the controls", k);
  out.theta_hat = out.v_hat.dot(my) / vv;
  out.eps_hat = my - out.theta_hat * out.v_hat;
  out.gamma_hat = vv / static_cast<double>(n);
  return out;
}

PlmFit plm_fit(const Dataset& data, const BasisMatrix& controls, int k, std::string descriptor) {
  return plm_fit(data, controls.values, k, std::move(descriptor));
}

std::string to_string(KappaMode mode) { return mode == KappaMode::cross_term_full ? "cross_term_full" : "hc0"; }

KappaMode parse_kappa_mode(const std::string& text) {
  if (text == "hc0") return KappaMode::hc0;
  if (text == "cross_term_full" || text == "cross-term") return KappaMode::cross_term_full;
  throw InputError("unknown kappa mode '" + text + "'");
}

namespace {

// (1/n) sum_i a_i sum_j M_{l,ij} M_{l',ij} b_j
double cross_omega(const PlmFit& fl, const PlmFit& fm, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < fl.n; ++i) {
    if (a(i) == 0.0) continue;
    const Eigen::VectorXd row_l = fl.annihilator_row(i);
    const Eigen::VectorXd row_m = &fl == &fm ? row_l : fm.annihilator_row(i);
    total += a(i) * row_l.cwiseProduct(row_m).dot(b);
  }
  return total / static_cast<double>(fl.n);
}

}  // namespace

PlmVariance plm_variance(const PlmFit& fit, KappaMode mode) {
  if (!(fit.gamma_hat > 0.0)) throw NumericalError("non-positive Gamma_hat", fit.k);
  const auto n = static_cast<double>(fit.n);
  const Eigen::VectorXd v2 = fit.v_hat.cwiseAbs2();
  const Eigen::VectorXd e2 = fit.eps_hat.cwiseAbs2();
  PlmVariance out;
  out.kappa_mode = mode;
  out.omega_hat = mode == KappaMode::hc0 ? v2.dot(e2) / n : cross_omega(fit, fit, v2, e2);
  out.v_hat_n = out.omega_hat / (fit.gamma_hat * fit.gamma_hat);
  out.se = std::sqrt(out.v_hat_n / n);
  if (!std::isfinite(out.v_hat_n)) throw NumericalError("non-finite PLM variance", fit.k);
  return out;
}

CrossKCorrelation plm_cross_corr(std::span<const PlmFit> fits, unsigned threads) {
  if (fits.empty()) throw InputError("PLM cross-K correlation needs at least one fit");
  const Eigen::Index n = fits.front().n;
  for (const auto& f : fits) {
    if (f.n != n) throw InputError("all PLM fits must come from the same dataset");
    if (!(f.gamma_hat > 0.0)) throw NumericalError("non-positive Gamma_hat", f.k);
  }
  const std::size_t p = fits.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t l = 0; l < p; ++l)
    for (std::size_t m = l; m < p; ++m) pairs.emplace_back(l, m);

  Eigen::MatrixXd omega(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  parallel_for(pairs.size(), threads, [&](std::size_t idx) {
    const auto [l, m] = pairs[idx];
    const Eigen::VectorXd a = fits[l].v_hat.cwiseProduct(fits[m].v_hat);
    const Eigen::VectorXd b = fits[l].eps_hat.cwiseProduct(fits[m].eps_hat);
    const double value = cross_omega(fits[l], fits[m], a, b);
    omega(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m)) = value;
    omega(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)) = value;
  });

  CrossKCorrelation out;
  out.evaluation = "plm_theta";
  out.sigma_hat = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t l = 0; l < p; ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    if (!(omega(li, li) > 0.0)) throw NumericalError("degenerate PLM variance", fits[l].k);
    out.k_values.push_back(fits[l].k);
    out.point_variances.push_back(omega(li, li) / (fits[l].gamma_hat * fits[l].gamma_hat));
  }
  // Gamma factors cancel in the correlation since each Gamma_hat is positive
  for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(p); ++l)
    for (Eigen::Index m = l + 1; m < static_cast<Eigen::Index>(p); ++m) {
      const double rho = omega(l, m) / std::sqrt(omega(l, l) * omega(m, m));
      out.sigma_hat(l, m) = rho;
      out.sigma_hat(m, l) = rho;
    }
  return out;
}

PlmRobustResult plm_robust_ci(std::span<const PlmFit> fits, double alpha, int draws, std::uint64_t seed,
                              unsigned threads, KappaMode se_mode) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  PlmRobustResult out;
  out.sigma = plm_cross_corr(fits, threads);
  out.critical = pointwise_critical_value(out.sigma, alpha, draws, seed, threads);
  const double z = stats::z_two_sided(alpha);
  for (const auto& f : fits) {
    PlmInterval row;
    row.k = f.k;
    row.theta_hat = f.theta_hat;
    row.se_hc0 = plm_variance(f, KappaMode::hc0).se;
    row.se_cross_term = plm_variance(f, KappaMode::cross_term_full).se;
    const double se = se_mode == KappaMode::hc0 ? row.se_hc0 : row.se_cross_term;
    row.ci_standard = robust_ci(f.theta_hat, se, z);
    row.ci_robust = robust_ci(f.theta_hat, se, out.critical.c_hat);
    out.intervals.push_back(row);
  }
  return out;
}

}  // namespace sband

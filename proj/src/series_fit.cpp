#include "sband/series_fit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sband/errors.hpp"

namespace sband {

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kLeverageCeiling = 1.0 - 1e-10;

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

void Dataset::validate() const {
  if (y.size() < 2) throw InputError("dataset needs at least two observations");
  if (x.size() != y.size()) throw InputError("x and y have different lengths");
  if (w && w->size() != y.size()) throw InputError("w and y have different lengths");
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
  };
  if (!finite(y) || !finite(x) || (w && !finite(*w))) throw InputError("dataset contains non-finite values");
}

Support support_of(std::span<const double> x) {
  if (x.empty()) throw InputError("cannot take the support of an empty sample");
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return {*lo, *hi};
}

FitResult weighted_fit_design(std::span<const double> y, const Eigen::MatrixXd& design, const BasisSpec& spec,
                              std::span<const double> weights) {
  const Eigen::Index n = design.rows();
  const Eigen::Index dim = design.cols();
  if (static_cast<Eigen::Index>(y.size()) != n) throw InputError("response length does not match design rows");
  if (static_cast<Eigen::Index>(weights.size()) != n) throw InputError("weight length does not match design rows");
  // n == dim is allowed: an interpolating fit is valid, its CV and variance are not
  if (n < dim)
    throw InputError("fewer observations (" + std::to_string(n) + ") than basis functions (" +
                     std::to_string(dim) + ") for K=" + std::to_string(spec.k));
  double weight_total = 0.0;
  for (double e : weights) {
    if (!(e > 0.0) || !std::isfinite(e)) throw InputError("weights must be positive and finite");
    weight_total += e;
  }

  const auto yv = as_vector(y);
  const Eigen::VectorXd root_w = as_vector(weights).cwiseSqrt();
  const Eigen::MatrixXd scaled = root_w.asDiagonal() * design;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < dim) throw NumericalError("singular design: basis is numerically rank deficient", spec.k);

  FitResult out;
  out.k = spec.k;
  out.basis_spec = spec;
  out.n = n;
  out.design = design;
  out.beta_hat = qr.solve(root_w.cwiseProduct(yv));
  out.residuals = yv - design * out.beta_hat;

  const Eigen::MatrixXd q_thin = qr.householderQ() * Eigen::MatrixXd::Identity(n, dim);
  out.hat_diag = q_thin.rowwise().squaredNorm();

  // (P'WP)^{-1} = Pi R^{-1} R^{-T} Pi'
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(dim, dim).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(dim, dim));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  out.gram_inverse = weight_total * (perm * inner * perm.transpose());

  out.gram = design.transpose() * as_vector(weights).asDiagonal() * design / weight_total;
  const Eigen::VectorXd meat_w = as_vector(weights).cwiseProduct(out.residuals.cwiseAbs2());
  out.meat = design.transpose() * meat_w.asDiagonal() * design / weight_total;
  return out;
}

FitResult fit_design(std::span<const double> y, const Eigen::MatrixXd& design, const BasisSpec& spec) {
  const std::vector<double> ones(static_cast<std::size_t>(design.rows()), 1.0);
  return weighted_fit_design(y, design, spec, ones);
}

namespace {

BasisSpec resolved_for(const Dataset& data, const BasisSpec& spec) {
  if (spec.family == BasisFamily::spline && spec.knots.empty() && spec.k > 0)
    return resolve_knots(spec, std::span<const double>(data.x));
  return spec;
}

}  // namespace

FitResult fit(const Dataset& data, const BasisSpec& spec) {
  data.validate();
  const BasisSpec resolved = resolved_for(data, spec);
  const BasisMatrix basis = build_basis(resolved, data.x);
  return fit_design(data.y, basis.values, resolved);
}

FitResult weighted_fit(const Dataset& data, const BasisSpec& spec, std::span<const double> weights) {
  data.validate();
  const BasisSpec resolved = resolved_for(data, spec);
  const BasisMatrix basis = build_basis(resolved, data.x);
  return weighted_fit_design(data.y, basis.values, resolved, weights);
}

std::vector<double> predict(const FitResult& fit, std::span<const double> points) {
  const BasisMatrix basis = build_basis(fit.basis_spec, points);
  const Eigen::VectorXd values = basis.values * fit.beta_hat;
  return {values.data(), values.data() + values.size()};
}

double pointwise_variance(const FitResult& fit, const Eigen::VectorXd& basis_row) {
  if (basis_row.size() != fit.dim()) throw InputError("basis row length does not match the fit dimension");
  const Eigen::VectorXd a = fit.gram_inverse * basis_row;
  const double v = a.dot(fit.meat * a);
  if (!std::isfinite(v) || v <= 0.0) throw NumericalError("degenerate pointwise variance", fit.k);
  return v;
}

double standard_error(const FitResult& fit, const Eigen::VectorXd& basis_row) {
  return std::sqrt(pointwise_variance(fit, basis_row) / static_cast<double>(fit.n));
}

double loo_cv(const FitResult& fit) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < fit.n; ++i) {
    const double h = fit.hat_diag(i);
    if (h >= kLeverageCeiling)
      throw NumericalError("observation " + std::to_string(i) + " has leverage 1; leave-one-out CV undefined",
                           fit.k);
    const double r = fit.residuals(i) / (1.0 - h);
    total += r * r;
  }
  return total / static_cast<double>(fit.n);
}

std::string to_string(Functional functional) {
  return functional == Functional::derivative ? "derivative" : "value";
}

Functional parse_functional(const std::string& text) {
  if (text == "value") return Functional::value;
  if (text == "derivative") return Functional::derivative;
  throw InputError("unknown functional '" + text + "'");
}

Eigen::VectorXd functional_row(const BasisSpec& spec, double x, Functional functional) {
  return functional == Functional::derivative ? derivative_row(spec, x) : basis_row(spec, x);
}

CrossKCorrelation cross_k_correlation(std::span<const FitResult> fits, std::span<const Eigen::VectorXd> basis_rows,
                                      std::string evaluation) {
  if (fits.empty()) throw InputError("cross-K correlation needs at least one fit");
  if (basis_rows.size() != fits.size()) throw InputError("need one basis row per fit");
  const Eigen::Index n = fits.front().n;
  for (const auto& f : fits)
    if (f.n != n) throw InputError("all fits must come from the same dataset");

  const std::size_t p = fits.size();
  std::vector<Eigen::VectorXd> loadings(p);  // Q^{-1} a(K_j, x)
  CrossKCorrelation out;
  out.evaluation = std::move(evaluation);
  out.point_variances.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    out.k_values.push_back(fits[j].k);
    out.point_variances[j] = pointwise_variance(fits[j], basis_rows[j]);
    loadings[j] = fits[j].gram_inverse * basis_rows[j];
  }

  out.sigma_hat = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t l = j + 1; l < p; ++l) {
      // Omega_{jl} = (1/n) sum_i P_{K_j i} P_{K_l i}' e_{K_j i} e_{K_l i}
      const Eigen::VectorXd cross_resid = fits[j].residuals.cwiseProduct(fits[l].residuals);
      const Eigen::MatrixXd omega =
          fits[j].design.transpose() * cross_resid.asDiagonal() * fits[l].design / static_cast<double>(n);
      const double v_jl = loadings[j].dot(omega * loadings[l]);
      const double rho = v_jl / std::sqrt(out.point_variances[j] * out.point_variances[l]);
      out.sigma_hat(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = rho;
      out.sigma_hat(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = rho;
    }
  }
  return out;
}

CrossKCorrelation cross_k_correlation_at(std::span<const FitResult> fits, double x, Functional functional) {
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(fits.size());
  for (const auto& f : fits) rows.push_back(functional_row(f.basis_spec, x, functional));
  std::ostringstream label;
  label << to_string(functional) << "@x=" << x;
  return cross_k_correlation(fits, rows, label.str());
}

}  // namespace sband

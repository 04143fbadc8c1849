#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sband/basis.hpp"

namespace sband {

/// Observed sample: (y, x) for series regression, (y, w, x) for the partially linear model.
struct Dataset {
  std::vector<double> y;
  std::vector<double> x;
  std::optional<std::vector<double>> w;

  std::size_t size() const { return y.size(); }
  /// Throws InputError unless n >= 2, lengths agree and all values are finite.
  void validate() const;
};

/// [min(x), max(x)] of a sample.
Support support_of(std::span<const double> x);

/// Per-K least-squares state. Immutable after construction.
struct FitResult {
  int k = 0;
  BasisSpec basis_spec;            // knots resolved
  Eigen::Index n = 0;
  Eigen::MatrixXd design;          // P^K, n x dim
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd residuals;       // y - P^K beta_hat
  Eigen::MatrixXd gram;            // Q_hat = P'P / n
  Eigen::MatrixXd gram_inverse;    // Q_hat^{-1}
  Eigen::MatrixXd meat;            // Omega_hat = (1/n) sum P_i P_i' e_i^2
  Eigen::VectorXd hat_diag;

  int dim() const { return static_cast<int>(beta_hat.size()); }
};

/// Least squares of y on the basis evaluated at x. Singular designs throw NumericalError naming K.
FitResult fit(const Dataset& data, const BasisSpec& spec);

/// Least squares against an already evaluated design matrix.
FitResult fit_design(std::span<const double> y, const Eigen::MatrixXd& design, const BasisSpec& spec);

/// Weighted least squares: argmin sum e_i (y_i - P_i' b)^2. Gram, meat and hat values are
/// normalized by sum(e), so unit weights reproduce `fit` and an integer weight m on an
/// observation is equivalent to repeating it m times.
FitResult weighted_fit(const Dataset& data, const BasisSpec& spec, std::span<const double> weights);
FitResult weighted_fit_design(std::span<const double> y, const Eigen::MatrixXd& design, const BasisSpec& spec,
                              std::span<const double> weights);

std::vector<double> predict(const FitResult& fit, std::span<const double> points);

/// V_hat(K, x) = a' Q^{-1} Omega Q^{-1} a for a basis row (or transformed row for a functional).
double pointwise_variance(const FitResult& fit, const Eigen::VectorXd& basis_row);

/// sqrt(V_hat / n).
double standard_error(const FitResult& fit, const Eigen::VectorXd& basis_row);

/// Leave-one-out CV via the hat-matrix shortcut: mean((e_i / (1 - h_ii))^2).
double loo_cv(const FitResult& fit);

/// Linear functional of the regression function that inference targets.
enum class Functional { value, derivative };

std::string to_string(Functional functional);
Functional parse_functional(const std::string& text);

/// a_K(x): basis row for the value, derivative row for the derivative.
Eigen::VectorXd functional_row(const BasisSpec& spec, double x, Functional functional);

/// Estimated correlation of the t-statistics across candidate K at one point or functional.
struct CrossKCorrelation {
  Eigen::MatrixXd sigma_hat;
  std::vector<int> k_values;
  std::vector<double> point_variances;
  std::string evaluation;  // e.g. "value@x=0.5"
};

/// Sigma_hat(j,l) = V(K_j,K_l,x) / sqrt(V(K_j,x) V(K_l,x)) with cross-K meat built from
/// each model's own residuals.
CrossKCorrelation cross_k_correlation(std::span<const FitResult> fits, std::span<const Eigen::VectorXd> basis_rows,
                                      std::string evaluation = {});

/// Convenience: basis rows for the functional at x from each fit's spec.
CrossKCorrelation cross_k_correlation_at(std::span<const FitResult> fits, double x,
                                         Functional functional = Functional::value);

}  // namespace sband

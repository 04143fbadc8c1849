#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sband {

enum class BasisFamily { polynomial, spline };
enum class KnotRule { evenly_spaced, quantile };

struct Support {
  double lower = 0.0;
  double upper = 1.0;
};

/// Description of a series basis. `k` is the tuning parameter: polynomial degree
/// for polynomials, number of interior knots for splines.
struct BasisSpec {
  BasisFamily family = BasisFamily::spline;
  int spline_order = 3;  // B-spline order (degree + 1); 3 is quadratic
  int k = 0;
  Support support{};
  KnotRule knot_rule = KnotRule::evenly_spaced;
  // Resolved interior knots. Left empty for evenly spaced knots (computed on demand);
  // quantile knots must be filled in by resolve_knots before evaluation.
  std::vector<double> knots{};

  BasisSpec with_k(int new_k) const {
    BasisSpec copy = *this;
    copy.k = new_k;
    copy.knots.clear();
    return copy;
  }
};

/// Rows are evaluation points, columns basis functions.
struct BasisMatrix {
  Eigen::MatrixXd values;
  std::vector<double> points;
};

/// Number of basis functions: K + 1 for polynomials, K + order for splines.
int dimension(const BasisSpec& spec);

/// Validates the spec (order, K, support). Throws InputError.
void validate(const BasisSpec& spec);

/// Interior knots for a spline spec. Evenly spaced knots sit at a + j (b - a) / (K + 1);
/// quantile knots at the j / (K + 1) empirical quantiles of `x_sample`.
/// Polynomials have no knots and yield an empty vector.
std::vector<double> make_knots(const BasisSpec& spec,
                               std::optional<std::span<const double>> x_sample = std::nullopt);

/// Copy of `spec` with its interior knots filled in.
BasisSpec resolve_knots(const BasisSpec& spec,
                        std::optional<std::span<const double>> x_sample = std::nullopt);

BasisMatrix build_basis(const BasisSpec& spec, std::span<const double> points);
BasisMatrix build_derivative_basis(const BasisSpec& spec, std::span<const double> points);

/// Single-point conveniences.
Eigen::VectorXd basis_row(const BasisSpec& spec, double point);
Eigen::VectorXd derivative_row(const BasisSpec& spec, double point);

std::string to_string(BasisFamily family);
std::string to_string(KnotRule rule);
BasisFamily parse_basis_family(const std::string& text);
KnotRule parse_knot_rule(const std::string& text);

}  // namespace sband

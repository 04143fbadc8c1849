#include "sband/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sband/errors.hpp"
#include "sband/stats.hpp"

namespace sband {

namespace {

constexpr double kBoundaryTolerance = 1e-12;

std::vector<double> interior_knots(const BasisSpec& spec) {
  if (spec.family == BasisFamily::polynomial) return {};
  if (!spec.knots.empty()) return spec.knots;
  if (spec.k == 0) return {};
  if (spec.knot_rule == KnotRule::quantile)
    throw InputError("quantile knots must be resolved from a sample before evaluating the basis");
  return make_knots(spec);
}

// Full clamped knot vector: lower and upper boundary knots repeated `order` times.
std::vector<double> full_knot_vector(const BasisSpec& spec, const std::vector<double>& interior) {
  std::vector<double> t;
  t.reserve(interior.size() + 2 * static_cast<std::size_t>(spec.spline_order));
  t.insert(t.end(), static_cast<std::size_t>(spec.spline_order), spec.support.lower);
  t.insert(t.end(), interior.begin(), interior.end());
  t.insert(t.end(), static_cast<std::size_t>(spec.spline_order), spec.support.upper);
  return t;
}

double checked_point(const BasisSpec& spec, double x) {
  const double a = spec.support.lower;
  const double b = spec.support.upper;
  const double tol = kBoundaryTolerance * std::max(1.0, std::max(std::abs(a), std::abs(b)));
  if (!std::isfinite(x) || x < a - tol || x > b + tol)
    throw InputError("evaluation point " + std::to_string(x) + " outside support [" + std::to_string(a) + ", " +
                     std::to_string(b) + "]");
  return std::clamp(x, a, b);
}

// Index mu with t[mu] <= x < t[mu + 1]; the right endpoint belongs to the last span.
std::size_t find_span(const std::vector<double>& t, int order, double x) {
  const std::size_t first = static_cast<std::size_t>(order - 1);
  const std::size_t last = t.size() - static_cast<std::size_t>(order) - 1;
  if (x >= t[last + 1]) return last;
  auto it = std::upper_bound(t.begin() + static_cast<std::ptrdiff_t>(first),
                             t.begin() + static_cast<std::ptrdiff_t>(last + 1), x);
  return static_cast<std::size_t>(it - t.begin()) - 1;
}

// Nonzero B-splines of the given degree at x, for basis indices span - degree .. span.
std::vector<double> nonzero_basis(const std::vector<double>& t, std::size_t span, double x, int degree) {
  std::vector<double> values(static_cast<std::size_t>(degree) + 1, 0.0);
  std::vector<double> left(values.size()), right(values.size());
  values[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? values[r] / denom : 0.0;
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  return values;
}

void fill_spline_row(const BasisSpec& spec, const std::vector<double>& t, double x, bool derivative,
                     Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const int degree = spec.spline_order - 1;
  const std::size_t span = find_span(t, spec.spline_order, x);
  const std::size_t first = span - static_cast<std::size_t>(degree);
  row.setZero();
  if (!derivative) {
    const auto values = nonzero_basis(t, span, x, degree);
    for (int r = 0; r <= degree; ++r) row(static_cast<Eigen::Index>(first) + r) = values[r];
    return;
  }
  // d/dx B_{i,p} = p [B_{i,p-1} / (t_{i+p} - t_i) - B_{i+1,p-1} / (t_{i+p+1} - t_{i+1})]
  const auto lower = nonzero_basis(t, span, x, degree - 1);  // indices span-degree+1 .. span
  auto lower_at = [&](std::size_t i) -> double {
    if (i + static_cast<std::size_t>(degree) < span + 1 || i > span) return 0.0;
    return lower[i - (span + 1 - static_cast<std::size_t>(degree))];
  };
  for (std::size_t i = first; i <= span; ++i) {
    double value = 0.0;
    const double d1 = t[i + degree] - t[i];
    const double d2 = t[i + degree + 1] - t[i + 1];
    if (d1 > 0.0) value += lower_at(i) / d1;
    if (d2 > 0.0) value -= lower_at(i + 1) / d2;
    row(static_cast<Eigen::Index>(i)) = degree * value;
  }
}

void fill_polynomial_row(const BasisSpec& spec, double x, bool derivative, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const double a = spec.support.lower;
  const double b = spec.support.upper;
  // monomials in u in [-1, 1] for conditioning
  const double u = (2.0 * x - a - b) / (b - a);
  const double du = 2.0 / (b - a);
  double power = 1.0;
  row(0) = derivative ? 0.0 : 1.0;
  for (int k = 1; k <= spec.k; ++k) {
    if (derivative) {
      row(k) = k * power * du;
      power *= u;
    } else {
      power *= u;
      row(k) = power;
    }
  }
}

BasisMatrix evaluate(const BasisSpec& spec, std::span<const double> points, bool derivative) {
  validate(spec);
  if (derivative && spec.family == BasisFamily::spline && spec.spline_order < 2)
    throw InputError("derivative of a piecewise-constant (order 1) spline is not defined");
  std::vector<double> t;
  if (spec.family == BasisFamily::spline) t = full_knot_vector(spec, interior_knots(spec));

  BasisMatrix out;
  out.points.assign(points.begin(), points.end());
  out.values.resize(static_cast<Eigen::Index>(points.size()), dimension(spec));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double x = checked_point(spec, points[i]);
    auto row = out.values.row(static_cast<Eigen::Index>(i));
    if (spec.family == BasisFamily::spline)
      fill_spline_row(spec, t, x, derivative, row);
    else
      fill_polynomial_row(spec, x, derivative, row);
  }
  if (!out.values.allFinite()) throw NumericalError("non-finite basis value", spec.k);
  return out;
}

}  // namespace

int dimension(const BasisSpec& spec) {
  return spec.family == BasisFamily::polynomial ? spec.k + 1 : spec.k + spec.spline_order;
}

void validate(const BasisSpec& spec) {
  if (spec.k < 0) throw InputError("number of series terms K must be nonnegative");
  if (!(spec.support.lower < spec.support.upper) || !std::isfinite(spec.support.lower) ||
      !std::isfinite(spec.support.upper))
    throw InputError("degenerate support: lower bound must be below upper bound");
  if (spec.family == BasisFamily::spline) {
    if (spec.spline_order < 1) throw InputError("spline order must be at least 1");
    if (!spec.knots.empty()) {
      if (static_cast<int>(spec.knots.size()) != spec.k)
        throw InputError("resolved knot count does not match K");
      for (std::size_t j = 0; j < spec.knots.size(); ++j) {
        if (!(spec.knots[j] > spec.support.lower && spec.knots[j] < spec.support.upper))
          throw InputError("interior knots must lie strictly inside the support");
        if (j > 0 && !(spec.knots[j] > spec.knots[j - 1]))
          throw InputError("interior knots must be strictly increasing");
      }
    }
  }
}

std::vector<double> make_knots(const BasisSpec& spec, std::optional<std::span<const double>> x_sample) {
  if (spec.k < 0) throw InputError("number of series terms K must be nonnegative");
  const double a = spec.support.lower;
  const double b = spec.support.upper;
  if (!(a < b)) throw InputError("degenerate support: lower bound must be below upper bound");
  if (spec.family == BasisFamily::polynomial || spec.k == 0) return {};

  std::vector<double> knots(static_cast<std::size_t>(spec.k));
  const double slots = spec.k + 1.0;
  if (spec.knot_rule == KnotRule::evenly_spaced) {
    for (int j = 1; j <= spec.k; ++j) knots[j - 1] = a + j * (b - a) / slots;
    return knots;
  }

  if (!x_sample) throw InputError("quantile knot rule requires a sample of x values");
  std::vector<double> sorted(x_sample->begin(), x_sample->end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = std::set<double>(sorted.begin(), sorted.end()).size();
  if (distinct < static_cast<std::size_t>(spec.k))
    throw InputError("quantile knot rule needs at least K distinct sample values");
  for (int j = 1; j <= spec.k; ++j) knots[j - 1] = stats::interpolated_quantile(sorted, j / slots);
  for (std::size_t j = 0; j < knots.size(); ++j) {
    if (!(knots[j] > a && knots[j] < b))
      throw InputError("quantile knot falls on or outside the support boundary");
    if (j > 0 && !(knots[j] > knots[j - 1]))
      throw InputError("quantile knots are not strictly increasing (too many tied sample values)");
  }
  return knots;
}

BasisSpec resolve_knots(const BasisSpec& spec, std::optional<std::span<const double>> x_sample) {
  BasisSpec resolved = spec;
  resolved.knots = make_knots(spec, x_sample);
  return resolved;
}

BasisMatrix build_basis(const BasisSpec& spec, std::span<const double> points) {
  return evaluate(spec, points, false);
}

BasisMatrix build_derivative_basis(const BasisSpec& spec, std::span<const double> points) {
  return evaluate(spec, points, true);
}

Eigen::VectorXd basis_row(const BasisSpec& spec, double point) {
  const double pts[] = {point};
  return build_basis(spec, pts).values.row(0).transpose();
}

Eigen::VectorXd derivative_row(const BasisSpec& spec, double point) {
  const double pts[] = {point};
  return build_derivative_basis(spec, pts).values.row(0).transpose();
}

std::string to_string(BasisFamily family) { return family == BasisFamily::spline ? "spline" : "polynomial"; }

std::string to_string(KnotRule rule) { return rule == KnotRule::quantile ? "quantile" : "evenly_spaced"; }

BasisFamily parse_basis_family(const std::string& text) {
  if (text == "spline") return BasisFamily::spline;
  if (text == "polynomial" || text == "poly") return BasisFamily::polynomial;
  throw InputError("unknown basis family '" + text + "'");
}

KnotRule parse_knot_rule(const std::string& text) {
  if (text == "evenly_spaced" || text == "even") return KnotRule::evenly_spaced;
  if (text == "quantile") return KnotRule::quantile;
  throw InputError("unknown knot rule '" + text + "'");
}

}  // namespace sband

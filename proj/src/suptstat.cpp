#include "sband/suptstat.hpp"

#include <algorithm>
#include <cmath>

#include "sband/errors.hpp"
#include "sband/random.hpp"
#include "sband/stats.hpp"

namespace sband {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kEigenClipTolerance = 1e-8;

void check_simulation_args(double alpha, int draws) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (draws < 100) throw InputError("need at least 100 simulation draws");
  if (alpha * draws < 1.0) throw InputError("alpha * B must be at least 1");
}

}  // namespace

std::string to_string(CriticalMethod method) {
  switch (method) {
    case CriticalMethod::nested_se_ratio: return "nested_se_ratio";
    case CriticalMethod::weighted_bootstrap: return "weighted_bootstrap";
    case CriticalMethod::gaussian_sim: break;
  }
  return "gaussian_sim";
}

void check_correlation(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() == 0 || sigma.rows() != sigma.cols()) throw InputError("correlation matrix must be square");
  if (!sigma.allFinite()) throw InputError("correlation matrix has non-finite entries");
  const Eigen::Index p = sigma.rows();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(sigma(j, j) - 1.0) > kSymmetryTolerance)
      throw InputError("correlation matrix diagonal entry " + std::to_string(j) + " is not 1");
    for (Eigen::Index l = 0; l < p; ++l) {
      if (std::abs(sigma(j, l) - sigma(l, j)) > kSymmetryTolerance)
        throw InputError("correlation matrix is not symmetric");
      if (std::abs(sigma(j, l)) > 1.0 + kEigenClipTolerance)
        throw InputError("correlation matrix entry outside [-1, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the correlation matrix failed");
  if (eig.eigenvalues().minCoeff() < -kEigenClipTolerance)
    throw InputError("correlation matrix is not positive semidefinite (min eigenvalue " +
                     std::to_string(eig.eigenvalues().minCoeff()) + ")");
}

std::vector<double> gaussian_max_draws(const Eigen::MatrixXd& sigma, int draws, std::uint64_t seed,
                                       unsigned threads) {
  check_correlation(sigma);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the correlation matrix failed");
  // clip the small negative eigenvalues floating point leaves behind
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal();
  if (!factor.allFinite()) throw NumericalError("correlation matrix square root is not finite");

  const Eigen::Index p = sigma.rows();
  std::vector<double> maxima(static_cast<std::size_t>(draws));
  parallel_for(maxima.size(), threads, [&](std::size_t b) {
    Engine engine = make_engine(seed, b);
    std::normal_distribution<double> normal;
    Eigen::VectorXd g(p);
    for (Eigen::Index j = 0; j < p; ++j) g(j) = normal(engine);
    maxima[b] = (factor * g).cwiseAbs().maxCoeff();
  });
  return maxima;
}

CriticalValueResult critical_value_from_draws(std::vector<double> draws, double alpha, std::uint64_t seed,
                                              CriticalMethod method) {
  std::sort(draws.begin(), draws.end());
  CriticalValueResult out;
  out.alpha = alpha;
  out.draws = static_cast<int>(draws.size());
  out.seed = seed;
  out.method = method;
  out.c_hat = stats::order_quantile(draws, 1.0 - alpha);
  out.mc_se = stats::quantile_mc_se(draws, 1.0 - alpha, out.c_hat);
  if (!(out.c_hat > 0.0)) throw NumericalError("simulated critical value is not positive");
  return out;
}

CriticalValueResult pointwise_critical_value(const Eigen::MatrixXd& sigma, double alpha, int draws,
                                             std::uint64_t seed, unsigned threads, CriticalMethod method) {
  check_simulation_args(alpha, draws);
  return critical_value_from_draws(gaussian_max_draws(sigma, draws, seed, threads), alpha, seed, method);
}

CriticalValueResult pointwise_critical_value(const CrossKCorrelation& sigma, double alpha, int draws,
                                             std::uint64_t seed, unsigned threads, CriticalMethod method) {
  return pointwise_critical_value(sigma.sigma_hat, alpha, draws, seed, threads, method);
}

CrossKCorrelation nested_homoskedastic_corr(std::span<const double> ses) {
  if (ses.empty()) throw InputError("need at least one standard error");
  for (double s : ses)
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("standard errors must be positive and finite");
  const auto p = static_cast<Eigen::Index>(ses.size());
  CrossKCorrelation out;
  out.sigma_hat.resize(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index l = 0; l < p; ++l) {
      const double a = ses[static_cast<std::size_t>(j)];
      const double b = ses[static_cast<std::size_t>(l)];
      out.sigma_hat(j, l) = j == l ? 1.0 : std::min(a, b) / std::max(a, b);
    }
    out.k_values.push_back(static_cast<int>(j) + 1);
    out.point_variances.push_back(ses[static_cast<std::size_t>(j)] * ses[static_cast<std::size_t>(j)]);
  }
  out.evaluation = "nested_homoskedastic";
  return out;
}

Interval robust_ci(double estimate, double se, double c) {
  if (!(se >= 0.0)) throw InputError("standard error must be nonnegative");
  if (!(c > 0.0)) throw InputError("critical value must be positive");
  return {estimate - c * se, estimate + c * se};
}

BootstrapWeights exponential_weights(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  BootstrapWeights out;
  out.seed = seed;
  out.stream = stream;
  out.e.resize(n);
  Engine engine = make_engine(seed, stream);
  std::exponential_distribution<double> exponential(1.0);
  for (auto& e : out.e) {
    do {
      e = exponential(engine);
    } while (!(e > 0.0));
  }
  return out;
}

std::vector<double> bootstrap_sup_statistics(const Dataset& data, std::span<const FitResult> fits,
                                             std::span<const double> grid, int draws, std::uint64_t seed,
                                             unsigned threads) {
  data.validate();
  if (fits.empty()) throw InputError("bootstrap needs at least one fit");
  if (grid.empty()) throw InputError("bootstrap grid is empty");
  if (draws < 1) throw InputError("need at least one bootstrap draw");
  const auto n = static_cast<Eigen::Index>(data.size());

  struct PerK {
    // row-major, one dot product per grid point: a point's statistic does not depend on
    // which other points share the grid, so sups over nested grids are exactly monotone
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> grid_basis;
    Eigen::VectorXd inv_scale;  // sqrt(n) / sqrt(V(K, x))
  };
  std::vector<PerK> per_k(fits.size());
  for (std::size_t j = 0; j < fits.size(); ++j) {
    const auto& f = fits[j];
    if (f.n != n) throw InputError("fit and dataset sizes disagree");
    per_k[j].grid_basis = build_basis(f.basis_spec, grid).values;
    per_k[j].inv_scale.resize(static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index g = 0; g < per_k[j].grid_basis.rows(); ++g) {
      const double v = pointwise_variance(f, per_k[j].grid_basis.row(g).transpose());
      per_k[j].inv_scale(g) = std::sqrt(static_cast<double>(n) / v);
    }
  }

  const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), n);
  std::vector<double> sup(static_cast<std::size_t>(draws));
  parallel_for(sup.size(), threads, [&](std::size_t b) {
    const BootstrapWeights weights = exponential_weights(data.size(), seed, b);
    const Eigen::VectorXd root_w = Eigen::Map<const Eigen::VectorXd>(weights.e.data(), n).cwiseSqrt();
    const Eigen::VectorXd wy = root_w.cwiseProduct(y);
    double best = 0.0;
    for (std::size_t j = 0; j < fits.size(); ++j) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(root_w.asDiagonal() * fits[j].design);
      qr.setThreshold(1e-10);
      if (qr.rank() < fits[j].design.cols())
        throw NumericalError("weighted fit singular in bootstrap replication " + std::to_string(b), fits[j].k);
      const Eigen::VectorXd delta = qr.solve(wy) - fits[j].beta_hat;
      for (Eigen::Index g = 0; g < per_k[j].grid_basis.rows(); ++g)
        best = std::max(best, std::abs(per_k[j].grid_basis.row(g).dot(delta)) * per_k[j].inv_scale(g));
    }
    sup[b] = best;
  });
  return sup;
}

CriticalValueResult uniform_band_critical_value(const Dataset& data, std::span<const FitResult> fits,
                                                std::span<const double> grid, double alpha, int draws,
                                                std::uint64_t seed, unsigned threads) {
  check_simulation_args(alpha, draws);
  return critical_value_from_draws(bootstrap_sup_statistics(data, fits, grid, draws, seed, threads), alpha, seed,
                                   CriticalMethod::weighted_bootstrap);
}

bool Band::covers(std::span<const double> truth) const {
  if (truth.size() != grid.size()) throw InputError("truth length does not match the band grid");
  for (std::size_t g = 0; g < grid.size(); ++g)
    if (std::abs(truth[g] - center[g]) > half_width[g]) return false;
  return true;
}

double Band::average_width() const {
  double total = 0.0;
  for (double h : half_width) total += 2.0 * h;
  return half_width.empty() ? 0.0 : total / static_cast<double>(half_width.size());
}

Band make_band(const FitResult& fit, std::span<const double> grid, double c) {
  if (!(c > 0.0)) throw InputError("band critical value must be positive");
  if (grid.empty()) throw InputError("band grid is empty");
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (!(grid[g] > grid[g - 1])) throw InputError("band grid must be strictly increasing");
  const BasisMatrix basis = build_basis(fit.basis_spec, grid);
  Band band;
  band.grid.assign(grid.begin(), grid.end());
  band.k_used = fit.k;
  band.c_used = c;
  const Eigen::VectorXd center = basis.values * fit.beta_hat;
  band.center.assign(center.data(), center.data() + center.size());
  band.half_width.reserve(grid.size());
  for (Eigen::Index g = 0; g < basis.values.rows(); ++g)
    band.half_width.push_back(c * standard_error(fit, basis.values.row(g).transpose()));
  return band;
}

std::vector<double> even_grid(double lower, double upper, int count) {
  if (count < 1) throw InputError("grid needs at least one point");
  if (count == 1) return {lower};
  if (!(lower < upper)) throw InputError("grid bounds must be increasing");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int g = 0; g < count; ++g) out[g] = lower + (upper - lower) * g / (count - 1.0);
  out.back() = upper;
  return out;
}

}  // namespace sband

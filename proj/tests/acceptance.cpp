// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as arguments
// to run a subset, e.g. `acceptance 1 4`.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "sband/candidate_set.hpp"
#include "sband/cli.hpp"
#include "sband/plm.hpp"
#include "sband/random.hpp"
#include "sband/sim_harness.hpp"
#include "sband/stats.hpp"
#include "sband/suptstat.hpp"

using namespace sband;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [FAILED: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

// 1. nested homoskedastic critical value from the 11 published SEs, through the CLI
void criterion1(Outcome& o) {
  const auto start = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "sband_acceptance_c1";
  fs::create_directories(dir);
  std::ostringstream out, err;
  const int code = cli::run(
      std::vector<std::string>{"sband", "critvals", "--ses",
                               "0.0104,0.0128,0.0127,0.0129,0.0151,0.0197,0.0223,0.0223,0.0275,0.0286,0.0289",
                               "--alpha", "0.05", "--B", "100000", "--seed", "2024", "--out", dir.string()},
      out, err);
  const double elapsed = seconds_since(start);
  o.require(code == 0, "exit code " + std::to_string(code) + ": " + err.str());
  if (code != 0) return;
  const auto report = nlohmann::json::parse(std::ifstream(dir / "critvals.json"));
  const double c = report["result"]["c_hat"];
  o.detail << "critvals on the 11 published wage-elasticity SEs, B=100000: c_hat=" << fmt(c) << " (mc_se "
           << fmt(report["result"]["mc_se"])
           << ", target [2.48, 2.53]), " << fmt(elapsed, 2) << " s";
  o.require(c >= 2.48 && c <= 2.53, "c_hat outside [2.48, 2.53]");
  o.require(elapsed < 5.0, "runtime >= 5 s");
}

// 2. interval arithmetic of the published intervals
void criterion2(Outcome& o) {
  auto r4 = [](double v) { return std::round(v * 1e4) / 1e4; };
  const auto a = robust_ci(0.0543, 0.0151, 2.503);
  const auto b = robust_ci(0.0372, 0.0104, 1.96);
  o.detail << "robust_ci(0.0543, 0.0151, 2.503)=[" << fmt(a.lower) << ", " << fmt(a.upper)
           << "], robust_ci(0.0372, 0.0104, 1.96)=[" << fmt(b.lower) << ", " << fmt(b.upper) << "]";
  o.require(std::abs(r4(a.lower) - 0.0165) < 1e-9 && std::abs(r4(a.upper) - 0.0921) < 1e-9, "first interval");
  o.require(std::abs(r4(b.lower) - 0.0168) < 1e-9 && std::abs(r4(b.upper) - 0.0576) < 1e-9, "second interval");
}

// 3. coverage study at reduced scale
void criterion3(Outcome& o) {
  const auto start = Clock::now();
  auto run = [](int model, std::uint64_t seed) {
    sim::SimConfig c;
    c.model_id = model;
    c.n = 200;
    c.n_reps = 500;
    c.b_critical = 500;
    c.b_bootstrap = 500;
    c.master_seed = seed;
    c.threads = 0;
    return sim::run_coverage_study(c);
  };
  const auto m1 = run(1, 101);
  const auto m3 = run(3, 303);
  const double elapsed = seconds_since(start);

  const auto& s1 = m1.row("standard", "x=0.5");
  const auto& r1 = m1.row("robust_cv", "x=0.5");
  const auto& s3 = m3.row("standard", "x=0.5");
  const auto& p3 = m3.row("robust_cv_plus", "x=0.5");
  const auto& u3s = m3.row("standard", "uniform");
  const auto& u3p = m3.row("robust_cv_plus", "uniform");
  o.detail << "500 reps, n=200, B=500, K in {" << m1.k_values.front() << ".." << m1.k_values.back() << "}: "
           << "M1 x=0.5 std COV " << fmt(s1.coverage, 3) << " AL " << fmt(s1.avg_length, 3) << ", robust COV "
           << fmt(r1.coverage, 3) << " AL " << fmt(r1.avg_length, 3) << "; M3 x=0.5 std COV " << fmt(s3.coverage, 3)
           << ", robust(cv+) COV " << fmt(p3.coverage, 3) << "; M3 uniform std " << fmt(u3s.coverage, 3)
           << ", robust(cv+) " << fmt(u3p.coverage, 3) << "; " << fmt(elapsed, 1) << " s";
  o.require(std::abs(s1.coverage - 0.93) <= 0.04, "M1 standard coverage 0.93 +- 0.04");
  o.require(r1.coverage >= 0.94, "M1 robust(cv) coverage >= 0.94");
  o.require(std::abs(s1.avg_length / 0.36 - 1.0) <= 0.10, "M1 standard AL 0.36 +- 10%");
  o.require(std::abs(r1.avg_length / 0.46 - 1.0) <= 0.10, "M1 robust AL 0.46 +- 10%");
  o.require(std::abs(s3.coverage - 0.65) <= 0.07, "M3 standard coverage 0.65 +- 0.07");
  o.require(std::abs(p3.coverage - 0.92) <= 0.05, "M3 robust(cv+) coverage 0.92 +- 0.05");
  o.require(std::abs(u3s.coverage - 0.16) <= 0.06, "M3 uniform standard 0.16 +- 0.06");
  o.require(u3p.coverage >= 0.93, "M3 uniform robust(cv+) >= 0.93");
  o.require(elapsed < 600.0, "runtime >= 10 min");
}

// 4. independent coordinates against the closed form
void criterion4(Outcome& o) {
  const auto start = Clock::now();
  std::uint64_t seed = 40;
  for (int p : {2, 5, 10}) {
    for (double alpha : {0.10, 0.05}) {
      const auto r = pointwise_critical_value(Eigen::MatrixXd::Identity(p, p), alpha, 50000, ++seed);
      const double exact = oracle::independent_max_quantile(p, alpha);
      const bool ok = std::abs(r.c_hat - exact) <= 3.0 * r.mc_se;
      o.detail << "p=" << p << ",a=" << alpha << ": " << fmt(r.c_hat, 3) << " vs " << fmt(exact, 3) << "; ";
      o.require(ok, "p=" + std::to_string(p) + " alpha=" + fmt(alpha, 2));
    }
  }
  const double elapsed = seconds_since(start);
  o.detail << fmt(elapsed, 2) << " s";
  o.require(elapsed < 5.0, "runtime >= 5 s");
}

// 5. exact oracles
void criterion5(Outcome& o) {
  const auto start = Clock::now();
  std::mt19937_64 rng(55);
  double loo = 0.0, fwl = 0.0, gram = 0.0, dup = 0.0, deriv = 0.0, sandwich = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    // LOO shortcut vs refits, n <= 30
    {
      const auto d = oracle::random_dataset(rng, 20 + static_cast<std::size_t>(trial % 11));
      const auto f = fit(d, oracle::spline_spec(1 + trial % 4));
      loo = std::max(loo, std::abs(loo_cv(f) - oracle::loo_by_refits(f.design, oracle::to_vec(d.y))));
    }
    // FWL vs joint OLS
    {
      const auto d = oracle::random_dataset(rng, 200, true);
      const Eigen::MatrixXd c = build_basis(oracle::spline_spec(trial % 12), d.x).values;
      const auto f = plm_fit(d, c, trial % 12);
      fwl = std::max(fwl, std::abs(f.theta_hat - oracle::joint_ols_theta(oracle::to_vec(*d.w), c, oracle::to_vec(d.y))));
    }
    const auto d = oracle::random_dataset(rng, 100);
    std::vector<FitResult> fits;
    for (int k : {2, 3, 5, 7}) fits.push_back(fit(d, oracle::spline_spec(k)));
    // Sigma vs influence Gram, and the sandwich vs the naive oracle
    for (double x : {0.1, 0.5, 0.9}) {
      const auto c = cross_k_correlation_at(fits, x);
      std::vector<Eigen::MatrixXd> designs;
      std::vector<Eigen::VectorXd> res, rows;
      for (const auto& f : fits) {
        designs.push_back(oracle::design(f.basis_spec, d.x));
        res.push_back(f.residuals);
        rows.push_back(basis_row(f.basis_spec, x));
        const double naive = oracle::naive_sandwich(designs.back(), f.residuals, rows.back());
        sandwich = std::max(sandwich, std::abs(pointwise_variance(f, rows.back()) - naive) / naive);
      }
      gram = std::max(gram, (c.sigma_hat - oracle::influence_gram(designs, res, rows)).cwiseAbs().maxCoeff());
    }
    // weighted fit vs duplicated rows
    {
      std::uniform_int_distribution<int> count(1, 4);
      std::vector<double> weights(d.size());
      Dataset rep;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const int m = count(rng);
        weights[i] = m;
        for (int c = 0; c < m; ++c) {
          rep.y.push_back(d.y[i]);
          rep.x.push_back(d.x[i]);
        }
      }
      const auto spec = resolve_knots(oracle::spline_spec(4));
      dup = std::max(dup, (weighted_fit(d, spec, weights).beta_hat - fit(rep, spec).beta_hat).cwiseAbs().maxCoeff());
    }
    // derivative basis vs central differences; knots at j/7 never fall on the 0.01 grid
    {
      const auto spec = oracle::spline_spec(6);
      for (int g = 0; g <= 100; ++g) {
        const double t = std::clamp(g / 100.0, 1e-6, 1.0 - 1e-6);
        const Eigen::VectorXd fd = (basis_row(spec, t + 1e-6) - basis_row(spec, t - 1e-6)) / 2e-6;
        deriv = std::max(deriv, (derivative_row(spec, t) - fd).cwiseAbs().maxCoeff());
      }
    }
  }
  const double elapsed = seconds_since(start);
  o.detail << "max errors: LOO " << loo << ", FWL " << fwl << ", Sigma/Gram " << gram << ", dup-rows " << dup
           << ", derivative " << deriv << ", sandwich(rel) " << sandwich << "; " << fmt(elapsed, 2) << " s";
  o.require(loo < 1e-8, "LOO");
  o.require(fwl < 1e-8, "FWL");
  o.require(gram < 1e-10, "Sigma Gram");
  o.require(dup < 1e-10, "duplicated rows");
  o.require(deriv < 1e-5, "derivative");
  o.require(sandwich < 1e-10, "sandwich");
  o.require(elapsed < 30.0, "runtime >= 30 s");
}

// 6. invariants on random datasets
void criterion6(Outcome& o) {
  const auto start = Clock::now();
  std::mt19937_64 rng(66);
  int psd = 0, cbound = 0, nested = 0, monotone = 0, determinism = 0;
  const int datasets = 100;
  const double z = stats::z_two_sided(0.05);
  for (int t = 0; t < datasets; ++t) {
    const auto d = oracle::random_dataset(rng, 80 + static_cast<std::size_t>(t % 5) * 30, true);
    std::vector<FitResult> fits;
    for (int k : {1, 3, 4, 6}) fits.push_back(fit(d, oracle::spline_spec(k)));
    const double x = 0.05 + 0.9 * (t % 10) / 9.0;
    const auto sigma = cross_k_correlation_at(fits, x, t % 3 == 0 ? Functional::derivative : Functional::value);
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma.sigma_hat).eigenvalues().minCoeff();
    psd += min_eig >= -1e-8 && (sigma.sigma_hat.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-10;

    const auto crit = pointwise_critical_value(sigma, 0.05, 1000, 1000 + static_cast<std::uint64_t>(t), 1);
    cbound += crit.c_hat >= z - 3.0 * crit.mc_se;

    bool all_nested = true;
    for (const auto& f : fits) {
      const Eigen::VectorXd row = functional_row(f.basis_spec, x, Functional::value);
      const double est = row.dot(f.beta_hat), se = standard_error(f, row);
      all_nested = all_nested && (crit.c_hat < z || robust_ci(est, se, crit.c_hat).contains(robust_ci(est, se, z)));
    }
    nested += all_nested;

    const auto grid = even_grid(0.05, 0.95, 13);
    const std::vector<double> sub{grid[0], grid[4], grid[8], grid[12]};
    const auto full = bootstrap_sup_statistics(d, fits, grid, 100, 7 + static_cast<std::uint64_t>(t), 1);
    const auto fewer_points = bootstrap_sup_statistics(d, fits, sub, 100, 7 + static_cast<std::uint64_t>(t), 1);
    const auto fewer_k =
        bootstrap_sup_statistics(d, std::span<const FitResult>(fits.data(), 2), grid, 100, 7 + static_cast<std::uint64_t>(t), 1);
    bool mono = true;
    for (std::size_t b = 0; b < full.size(); ++b) mono = mono && full[b] >= fewer_points[b] && full[b] >= fewer_k[b];
    const double c_full = critical_value_from_draws(full, 0.05, 0, CriticalMethod::weighted_bootstrap).c_hat;
    const double c_sub = critical_value_from_draws(fewer_k, 0.05, 0, CriticalMethod::weighted_bootstrap).c_hat;
    monotone += mono && c_full >= c_sub;

    // seeded outputs must not depend on the worker count
    bool same = gaussian_max_draws(sigma.sigma_hat, 500, 5 + static_cast<std::uint64_t>(t), 1) ==
                gaussian_max_draws(sigma.sigma_hat, 500, 5 + static_cast<std::uint64_t>(t), 4);
    same = same && full == bootstrap_sup_statistics(d, fits, grid, 100, 7 + static_cast<std::uint64_t>(t), 4);
    std::vector<PlmFit> plm;
    for (int k : {1, 3}) plm.push_back(plm_fit(d, build_basis(oracle::spline_spec(k), d.x), k));
    const auto p1 = plm_robust_ci(plm, 0.05, 500, 9, 1);
    const auto p4 = plm_robust_ci(plm, 0.05, 500, 9, 4);
    same = same && p1.critical.c_hat == p4.critical.c_hat && p1.sigma.sigma_hat == p4.sigma.sigma_hat;
    determinism += same;
  }
  // end to end: a small coverage study
  sim::SimConfig c;
  c.n_reps = 6;
  c.b_critical = 200;
  c.b_bootstrap = 100;
  c.threads = 1;
  const auto a = sim::run_coverage_study(c);
  c.threads = 4;
  const auto b = sim::run_coverage_study(c);
  bool sim_same = a.rows.size() == b.rows.size();
  for (std::size_t i = 0; sim_same && i < a.rows.size(); ++i)
    sim_same = a.rows[i].coverage == b.rows[i].coverage && a.rows[i].avg_length == b.rows[i].avg_length;

  const double elapsed = seconds_since(start);
  o.detail << datasets << " datasets: PSD/unit-diag " << psd << ", c>=1.96-3se " << cbound << ", robust>=standard "
           << nested << ", bootstrap superset monotone " << monotone << ", thread-invariant " << determinism
           << ", coverage study thread-invariant " << (sim_same ? "yes" : "no") << "; " << fmt(elapsed, 1) << " s";
  o.require(psd == datasets, "PSD");
  o.require(cbound == datasets, "c lower bound");
  o.require(nested == datasets, "nesting");
  o.require(monotone == datasets, "superset monotonicity");
  o.require(determinism == datasets && sim_same, "determinism");
}

// 7. PLM coverage on a homoskedastic linear-truth design. Controls are the first K terms of
// (1, z_1, ..., z_59) with iid normal covariates; g0 and E[w|z] are linear in z_1, z_2, so every
// K in the set is correctly specified.
void criterion7(Outcome& o) {
  const auto start = Clock::now();
  const std::vector<int> ks{10, 30, 60};
  const double theta0 = 1.0;
  const int reps = 500;
  const int n = 300;
  std::vector<std::vector<PlmInterval>> results(reps);
  parallel_for(static_cast<std::size_t>(reps), 0, [&](std::size_t r) {
    Engine eng = make_engine(777, r);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(n, ks.back());
    z.col(0).setOnes();
    Dataset d{{}, {}, std::vector<double>{}};
    for (int i = 0; i < n; ++i) {
      for (int j = 1; j < ks.back(); ++j) z(i, j) = normal(eng);
      const double w = 0.5 * z(i, 1) - 0.5 * z(i, 2) + normal(eng);
      d.x.push_back(z(i, 1));
      d.w->push_back(w);
      d.y.push_back(theta0 * w + 1.0 + z(i, 1) + 0.5 * z(i, 2) + normal(eng));
    }
    std::vector<PlmFit> fits;
    for (int k : ks) fits.push_back(plm_fit(d, z.leftCols(k), k));
    results[r] = plm_robust_ci(fits, 0.05, 1000, stream_seed(777, 100000 + r), 1).intervals;
  });
  int joint = 0;
  std::vector<int> per_k(ks.size(), 0);
  for (const auto& rows : results) {
    bool all = true;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      all = all && rows[j].ci_robust.contains(theta0);
      per_k[j] += rows[j].ci_standard.contains(theta0);
    }
    joint += all;
  }
  const double elapsed = seconds_since(start);
  o.detail << reps << " reps, n=" << n << ", K={10,30,60}: joint robust coverage " << fmt(joint / double(reps), 3)
           << "; hc0 coverage per K";
  for (std::size_t j = 0; j < ks.size(); ++j) o.detail << " " << fmt(per_k[j] / double(reps), 3);
  o.detail << "; " << fmt(elapsed, 1) << " s";
  o.require(joint / double(reps) >= 0.93, "joint robust coverage >= 0.93");
  for (std::size_t j = 0; j < ks.size(); ++j)
    o.require(per_k[j] / double(reps) >= 0.93, "hc0 coverage K=" + std::to_string(ks[j]) + " >= 0.93");
  o.require(elapsed < 300.0, "runtime >= 5 min");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<void(Outcome&)>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                            criterion5, criterion6, criterion7};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      criteria[i](o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

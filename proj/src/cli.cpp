#include "sband/cli.hpp"

#include <optional>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "sband/candidate_set.hpp"
#include "sband/errors.hpp"
#include "sband/plm.hpp"
#include "sband/random.hpp"
#include "sband/report.hpp"
#include "sband/sim_harness.hpp"
#include "sband/stats.hpp"
#include "sband/suptstat.hpp"

namespace sband::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Input parsing

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = text.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return columns[j];
  throw InputError("column '" + name + "' not found in CSV header");
}

CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (blank(line) || trim(line).front() == '#') continue;
    table.header = split_fields(line);
    break;
  }
  if (table.header.empty()) throw InputError(source + ": missing CSV header row");
  table.columns.assign(table.header.size(), {});
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != table.header.size())
      throw InputError(source + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto value = parse_double(fields[j]);
      if (!value || !std::isfinite(*value))
        throw InputError(source + ": line " + std::to_string(line_no) + ": column '" + table.header[j] +
                         "': not a finite number: '" + fields[j] + "'");
      table.columns[j].push_back(*value);
    }
  }
  return table;
}

CsvTable read_csv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file " + path.string());
  return read_csv(in, path.string());
}

Dataset load_dataset(const fs::path& path, const std::string& y_col, const std::string& x_col,
                     const std::optional<std::string>& w_col) {
  const CsvTable table = read_csv_file(path);
  Dataset data;
  data.y = table.column(y_col);
  data.x = table.column(x_col);
  if (w_col) data.w = table.column(*w_col);
  data.validate();
  return data;
}

Eigen::MatrixXd read_matrix_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || trim(line).front() == '#') continue;
    const auto fields = split_fields(line);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : fields) {
      const auto v = parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": non-numeric matrix entry");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path.string() + ": empty matrix");
  const auto p = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)].size()) != p)
      throw InputError(path.string() + ": matrix is not square");
    for (Eigen::Index l = 0; l < p; ++l) m(j, l) = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
  }
  return m;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw InputError(path.string() + ": line " + std::to_string(line_no) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct DataOptions {
  std::string input;
  std::string y_col = "y";
  std::string x_col = "x";
  std::string w_col = "w";
};

struct BasisOptions {
  std::string family = "spline";
  int order = 3;
  std::vector<double> support;
  std::string knots = "even";
  std::string k_rule = "sim";
  std::vector<int> k_list;
  double c1 = 2.0;
};

struct InferenceOptions {
  std::vector<double> points;
  std::string functional = "value";
  double alpha = 0.05;
  int draws = 5000;
  int boot_draws = 1000;
  std::uint64_t seed = 1;
  bool band = false;
  int grid_size = 91;
  std::vector<double> band_support;
};

struct CritOptions {
  std::vector<double> ses;
  std::string sigma_path;
  double alpha = 0.05;
  int draws = 5000;
  std::uint64_t seed = 1;
};

struct PlmOptions {
  double alpha = 0.05;
  int draws = 5000;
  std::uint64_t seed = 1;
  std::string kappa = "hc0";
};

struct SimOptions {
  int model = 1;
  int n = 200;
  int reps = 2000;
  int draws = 1000;
  int boot_draws = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  bool homoskedastic = false;
  int grid_size = 91;
  std::vector<double> band_support{0.05, 0.95};
  std::vector<double> points{0.2, 0.5, 0.8, 0.9};
  std::vector<int> k_list;
  bool tolerate_failures = false;
  bool no_bands = false;
  bool replications = false;
};

struct Globals {
  std::string out_dir;
  unsigned threads = 0;
  std::string config_path;
};

// options that do not change results and stay out of the reproducibility header
const std::vector<std::string> kUnrecordedOptions{"help", "out", "threads", "config"};

std::string option_name(const CLI::Option* opt) {
  if (!opt->get_lnames().empty()) return opt->get_lnames().front();
  return opt->get_name();
}

/// Every option of the subcommand with its resolved value.
std::vector<std::pair<std::string, std::string>> resolved_config(const CLI::App* sub) {
  std::vector<std::pair<std::string, std::string>> out{{"command", sub->get_name()}};
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = option_name(opt);
    if (std::find(kUnrecordedOptions.begin(), kUnrecordedOptions.end(), name) != kUnrecordedOptions.end())
      continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
      if (value == "{}") value.clear();
    }
    out.emplace_back(name, value);
  }
  return out;
}

Json config_json(const std::vector<std::pair<std::string, std::string>>& config) {
  Json out = Json::object();
  for (const auto& [k, v] : config) out[k] = v;
  return out;
}

fs::path output_dir(const Globals& globals) {
  fs::path dir = ".";
  if (!globals.out_dir.empty()) {
    dir = globals.out_dir;
  } else if (const char* env = std::getenv("SBAND_OUTPUT_DIR"); env && *env) {
    dir = env;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_json(const fs::path& path, const Json& json) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << json.dump(2) << '\n';
}

BasisSpec spec_template(const BasisOptions& opts, const Dataset& data) {
  BasisSpec spec;
  spec.family = parse_basis_family(opts.family);
  spec.spline_order = opts.order;
  spec.knot_rule = parse_knot_rule(opts.knots);
  if (opts.support.empty()) {
    spec.support = support_of(data.x);
  } else {
    if (opts.support.size() != 2) throw InputError("--support takes two values: lower,upper");
    spec.support = {opts.support[0], opts.support[1]};
  }
  validate(spec);
  return spec;
}

CandidateSet candidate_set(const BasisOptions& opts, const Dataset& data, const BasisSpec& spec, unsigned threads) {
  const CandidateRule rule = parse_candidate_rule(opts.k_rule);
  CandidateParams params;
  params.explicit_k = opts.k_list;
  params.c1 = opts.c1;
  if (rule == CandidateRule::explicit_list && opts.k_list.empty())
    throw InputError("--k-rule explicit requires --k-list");
  if (rule == CandidateRule::cv_anchored) {
    // anchor on the CV choice over a pilot set (the explicit list, else the simulation rule)
    const CandidateSet pilot =
        opts.k_list.empty() ? build_candidate_set(CandidateRule::simulation_rule, data.size())
                            : build_candidate_set(CandidateRule::explicit_list, data.size(), params);
    params.k_cv = select_cv(fit_candidates(data, pilot, spec, threads)).k_cv;
  }
  return build_candidate_set(rule, data.size(), params);
}

Json selection_json(const Selection& selection) {
  return Json{{"k_cv", selection.k_cv},
              {"k_cv_plus", selection.k_cv_plus()},
              {"cv_plus_unclipped", selection.cv_plus_unclipped},
              {"cv_plus_clipped", selection.cv_plus_clipped}};
}

Json fits_json(const std::vector<FitResult>& fits, const Selection& selection) {
  Json out = Json::array();
  for (const auto& f : fits) {
    out.push_back(Json{{"K", f.k},
                       {"dimension", f.dim()},
                       {"cv", selection.cv_scores.at(f.k)},
                       {"knots", f.basis_spec.knots},
                       {"beta_hat", std::vector<double>(f.beta_hat.data(), f.beta_hat.data() + f.beta_hat.size())}});
  }
  return out;
}

const FitResult& fit_for(const std::vector<FitResult>& fits, int k) {
  for (const auto& f : fits)
    if (f.k == k) return f;
  throw InputError("K=" + std::to_string(k) + " not among the fitted candidates");
}

int cmd_fit_or_ci(const CLI::App* sub, bool with_inference, const DataOptions& data_opts,
                  const BasisOptions& basis_opts, const InferenceOptions& inf, const Globals& globals,
                  std::ostream& out) {
  const Dataset data = load_dataset(data_opts.input, data_opts.y_col, data_opts.x_col);
  const BasisSpec spec = spec_template(basis_opts, data);
  const CandidateSet set = candidate_set(basis_opts, data, spec, globals.threads);
  const auto fits = fit_candidates(data, set, spec, globals.threads);
  const Selection selection = select_cv(fits);
  const auto config = resolved_config(sub);

  Json report{{"command", sub->get_name()},
              {"config", config_json(config)},
              {"seed", inf.seed},
              {"n", data.size()},
              {"support", Json::array({spec.support.lower, spec.support.upper})},
              {"candidate_rule", to_string(set.rule)},
              {"k_values", set.k_values},
              {"fits", fits_json(fits, selection)},
              {"selection", selection_json(selection)}};

  if (with_inference) {
    if (inf.points.empty()) throw InputError("ci requires at least one evaluation point (--x)");
    const Functional functional = parse_functional(inf.functional);
    const double z = stats::z_two_sided(inf.alpha);
    const FitResult& fit_cv = fit_for(fits, selection.k_cv);
    // K_cv + 2 may fall outside an explicit list; fit it on its own then
    std::optional<FitResult> extra_plus;
    const bool plus_listed = std::ranges::count(set.k_values, selection.k_cv_plus()) > 0;
    if (!plus_listed) extra_plus.emplace(fit(data, resolve_knots(spec.with_k(selection.k_cv_plus()), data.x)));
    const FitResult& fit_plus = plus_listed ? fit_for(fits, selection.k_cv_plus()) : *extra_plus;
    Json points = Json::array();
    for (std::size_t j = 0; j < inf.points.size(); ++j) {
      const double x = inf.points[j];
      const CrossKCorrelation sigma = cross_k_correlation_at(fits, x, functional);
      const CriticalValueResult crit =
          pointwise_critical_value(sigma, inf.alpha, inf.draws, stream_seed(inf.seed, j + 1), globals.threads);
      Json estimates = Json::array();
      for (const auto& f : fits) {
        const Eigen::VectorXd row = functional_row(f.basis_spec, x, functional);
        estimates.push_back(Json{{"K", f.k}, {"estimate", row.dot(f.beta_hat)}, {"se", standard_error(f, row)}});
      }
      const Eigen::VectorXd row_cv = functional_row(fit_cv.basis_spec, x, functional);
      const Eigen::VectorXd row_plus = functional_row(fit_plus.basis_spec, x, functional);
      const double est_cv = row_cv.dot(fit_cv.beta_hat);
      const double se_cv = standard_error(fit_cv, row_cv);
      const double est_plus = row_plus.dot(fit_plus.beta_hat);
      const double se_plus = standard_error(fit_plus, row_plus);
      points.push_back(Json{{"x", x},
                            {"functional", to_string(functional)},
                            {"sigma", to_json(sigma)},
                            {"critical_value", to_json(crit)},
                            {"z", z},
                            {"estimates", std::move(estimates)},
                            {"standard_ci", to_json(robust_ci(est_cv, se_cv, z))},
                            {"robust_ci", to_json(robust_ci(est_cv, se_cv, crit.c_hat))},
                            {"robust_ci_cv_plus", to_json(robust_ci(est_plus, se_plus, crit.c_hat))}});
      out << "x=" << x << "  K_cv=" << selection.k_cv << "  c_hat=" << crit.c_hat << "  estimate=" << est_cv
          << "  se=" << se_cv << '\n';
    }
    report["points"] = std::move(points);

    if (inf.band) {
      Support band_support = spec.support;
      if (!inf.band_support.empty()) {
        if (inf.band_support.size() != 2) throw InputError("--band-support takes two values: lower,upper");
        band_support = {inf.band_support[0], inf.band_support[1]};
      }
      const auto grid = even_grid(band_support.lower, band_support.upper, inf.grid_size);
      const CriticalValueResult crit = uniform_band_critical_value(data, fits, grid, inf.alpha, inf.boot_draws,
                                                                   stream_seed(inf.seed, 1000), globals.threads);
      const Band band = make_band(fit_cv, grid, crit.c_hat);
      const Band band_plus = make_band(fit_plus, grid, crit.c_hat);
      report["band"] = Json{{"critical_value", to_json(crit)},
                            {"band", to_json(band)},
                            {"band_cv_plus", to_json(band_plus)}};
      const fs::path band_path = output_dir(globals) / "band.csv";
      std::ofstream csv(band_path);
      if (!csv) throw InputError("cannot write " + band_path.string());
      CsvPreamble preamble = config;
      preamble.emplace_back("k_used", std::to_string(band.k_used));
      write_band_csv(csv, band, preamble);
      out << "band: c_hat=" << crit.c_hat << " written to " << band_path.string() << '\n';
    }
  } else {
    out << "K_cv=" << selection.k_cv << " over {";
    for (std::size_t j = 0; j < set.k_values.size(); ++j) out << (j ? "," : "") << set.k_values[j];
    out << "}\n";
  }
  write_json(output_dir(globals) / "report.json", report);
  return kSuccess;
}

int cmd_critvals(const CLI::App* sub, const CritOptions& opts, const Globals& globals, std::ostream& out) {
  if (opts.ses.empty() == opts.sigma_path.empty()) throw InputError("give exactly one of --ses or --sigma");
  CriticalValueResult result;
  Json sigma_json;
  if (!opts.ses.empty()) {
    const CrossKCorrelation sigma = nested_homoskedastic_corr(opts.ses);
    result = pointwise_critical_value(sigma, opts.alpha, opts.draws, opts.seed, globals.threads,
                                      CriticalMethod::nested_se_ratio);
    sigma_json = to_json(sigma)["sigma_hat"];
  } else {
    const Eigen::MatrixXd sigma = read_matrix_file(opts.sigma_path);
    result = pointwise_critical_value(sigma, opts.alpha, opts.draws, opts.seed, globals.threads);
    CrossKCorrelation wrapped;
    wrapped.sigma_hat = sigma;
    sigma_json = to_json(wrapped)["sigma_hat"];
  }
  Json report{{"command", "critvals"},
              {"config", config_json(resolved_config(sub))},
              {"seed", opts.seed},
              {"result", to_json(result)},
              {"sigma_hat", std::move(sigma_json)}};
  write_json(output_dir(globals) / "critvals.json", report);
  out << std::setprecision(6) << "c_hat=" << result.c_hat << " mc_se=" << result.mc_se << " B=" << result.draws
      << '\n';
  return kSuccess;
}

int cmd_plm(const CLI::App* sub, const DataOptions& data_opts, const BasisOptions& basis_opts,
            const PlmOptions& opts, const Globals& globals, std::ostream& out) {
  const Dataset data = load_dataset(data_opts.input, data_opts.y_col, data_opts.x_col, data_opts.w_col);
  const BasisSpec spec = spec_template(basis_opts, data);
  if (parse_candidate_rule(basis_opts.k_rule) == CandidateRule::cv_anchored)
    throw InputError("plm supports the explicit and simulation candidate rules");
  CandidateParams params;
  params.explicit_k = basis_opts.k_list;
  const CandidateRule rule =
      basis_opts.k_list.empty() ? parse_candidate_rule(basis_opts.k_rule) : CandidateRule::explicit_list;
  const CandidateSet set = build_candidate_set(rule, data.size(), params);

  std::vector<PlmFit> fits(set.p());
  parallel_for(set.p(), globals.threads, [&](std::size_t j) {
    const int k = set.k_values[j];
    const BasisSpec resolved = resolve_knots(spec.with_k(k), std::span<const double>(data.x));
    fits[j] = plm_fit(data, build_basis(resolved, data.x), k, to_string(resolved.family) + "(K=" +
                                                                   std::to_string(k) + ")");
  });
  const PlmRobustResult result =
      plm_robust_ci(fits, opts.alpha, opts.draws, opts.seed, globals.threads, parse_kappa_mode(opts.kappa));

  Json report = to_json(result);
  report["command"] = "plm";
  report["config"] = config_json(resolved_config(sub));
  report["kappa_mode"] = opts.kappa;
  write_json(output_dir(globals) / "plm_report.json", report);
  out << "c_hat=" << result.critical.c_hat << '\n';
  for (const auto& row : result.intervals)
    out << "K=" << row.k << "  theta=" << row.theta_hat << "  se_hc0=" << row.se_hc0 << "  robust=["
        << row.ci_robust.lower << ", " << row.ci_robust.upper << "]\n";
  return kSuccess;
}

int cmd_simulate(const CLI::App* sub, const SimOptions& opts, const Globals& globals, std::ostream& out) {
  sim::SimConfig config;
  config.model_id = opts.model;
  if (opts.n < 2) throw InputError("--n must be at least 2");
  config.n = static_cast<std::size_t>(opts.n);
  config.n_reps = opts.reps;
  config.b_critical = opts.draws;
  config.b_bootstrap = opts.boot_draws;
  config.alpha = opts.alpha;
  config.master_seed = opts.seed;
  config.heteroskedastic = !opts.homoskedastic;
  config.band_grid_size = opts.grid_size;
  if (opts.band_support.size() != 2) throw InputError("--band-support takes two values: lower,upper");
  config.band_support = {opts.band_support[0], opts.band_support[1]};
  config.eval_points = opts.points;
  if (!opts.k_list.empty()) {
    config.candidate_rule = CandidateRule::explicit_list;
    config.explicit_k = opts.k_list;
  }
  config.threads = globals.threads;
  config.tolerate_failures = opts.tolerate_failures;
  config.uniform_bands = !opts.no_bands;

  const sim::SimReport report = sim::run_coverage_study(config);
  const auto resolved = resolved_config(sub);
  Json json = to_json(report, opts.replications);
  json["command"] = "simulate";
  json["cli_config"] = config_json(resolved);
  const fs::path dir = output_dir(globals);
  write_json(dir / "sim_report.json", json);
  std::ofstream csv(dir / "coverage.csv");
  if (!csv) throw InputError("cannot write coverage.csv");
  write_coverage_csv(csv, report, resolved);

  out << "model " << config.model_id << ", n=" << config.n << ", " << report.completed << " replications ("
      << report.seconds << " s)\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& row : report.rows)
    out << "  " << std::left << std::setw(16) << row.method << std::setw(10) << row.target << " COV "
        << row.coverage << "  AL " << row.avg_length << '\n';
  return kSuccess;
}

void add_data_options(CLI::App* sub, DataOptions& opts, bool with_w) {
  sub->add_option("--input,-i", opts.input, "CSV file with a header row")->required();
  sub->add_option("--y-col", opts.y_col, "response column");
  sub->add_option("--x-col", opts.x_col, "regressor column");
  if (with_w) sub->add_option("--w-col", opts.w_col, "column of the linear regressor w");
}

void add_basis_options(CLI::App* sub, BasisOptions& opts) {
  sub->add_option("--basis", opts.family, "spline or polynomial");
  sub->add_option("--order", opts.order, "B-spline order (3 = quadratic)");
  sub->add_option("--support", opts.support, "basis support lower,upper (default: data range)")
      ->delimiter(',')
      ->expected(2);
  sub->add_option("--knots", opts.knots, "knot placement: even or quantile");
  sub->add_option("--k-rule", opts.k_rule, "candidate set rule: sim, explicit or cv-anchored");
  sub->add_option("--k-list", opts.k_list, "explicit candidate K values")->delimiter(',');
  sub->add_option("--c1", opts.c1, "multiplier for the cv-anchored rule");
}

void add_global_options(CLI::App* sub, Globals& globals) {
  sub->add_option("--out,-o", globals.out_dir, "output directory (default: $SBAND_OUTPUT_DIR or .)");
  sub->add_option("--threads", globals.threads, "worker threads, 0 = all cores");
  sub->add_option("--config", globals.config_path, "key=value file; command-line flags take precedence");
}

// Splices key=value config entries into the argument list, skipping keys given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args, CLI::App& app) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.size() < 2) return args;

  CLI::App* sub = nullptr;
  std::size_t sub_index = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    sub = app.get_subcommand_no_throw(args[i]);
    if (sub) {
      sub_index = i;
      break;
    }
  }
  if (!sub) return args;

  auto given = [&](const std::string& key) {
    for (const auto& a : args)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config_file(config_path)) {
    if (key == "config" || given(key)) continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw InputError("unknown config key '" + key + "' for command " + sub->get_name());
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value.empty()) extra.push_back("--" + key);
      continue;
    }
    extra.push_back("--" + key + "=" + value);
  }
  std::vector<std::string> merged(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_index) + 1);
  merged.insert(merged.end(), extra.begin(), extra.end());
  merged.insert(merged.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_index) + 1, args.end());
  return merged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Series regression inference robust to the choice of the number of series terms", "sband"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Globals globals;
  DataOptions data_opts;
  BasisOptions basis_opts;
  InferenceOptions inf;
  CritOptions crit;
  PlmOptions plm;
  SimOptions sim_opts;

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit every candidate K and select K by leave-one-out CV");
  add_data_options(fit_cmd, data_opts, false);
  add_basis_options(fit_cmd, basis_opts);
  add_global_options(fit_cmd, globals);
  fit_cmd->add_option("--seed", inf.seed, "recorded for reproducibility");

  CLI::App* ci_cmd = app.add_subcommand("ci", "standard and specification-robust intervals and bands");
  add_data_options(ci_cmd, data_opts, false);
  add_basis_options(ci_cmd, basis_opts);
  add_global_options(ci_cmd, globals);
  ci_cmd->add_option("--x", inf.points, "evaluation points")->delimiter(',');
  ci_cmd->add_option("--functional", inf.functional, "value or derivative");
  ci_cmd->add_option("--alpha", inf.alpha, "significance level");
  ci_cmd->add_option("--B", inf.draws, "Gaussian simulation draws per point");
  ci_cmd->add_option("--B-boot", inf.boot_draws, "weighted bootstrap draws for bands");
  ci_cmd->add_option("--seed", inf.seed, "random seed");
  ci_cmd->add_flag("--band", inf.band, "also compute a uniform band and write band.csv");
  ci_cmd->add_option("--grid-size", inf.grid_size, "band grid points");
  ci_cmd->add_option("--band-support", inf.band_support, "band range lower,upper")->delimiter(',')->expected(2);

  CLI::App* crit_cmd = app.add_subcommand("critvals", "simulated sup-t critical value");
  crit_cmd->add_option("--ses", crit.ses, "standard errors of nested homoskedastic models, by size")
      ->delimiter(',');
  crit_cmd->add_option("--sigma", crit.sigma_path, "CSV correlation matrix");
  crit_cmd->add_option("--alpha", crit.alpha, "significance level");
  crit_cmd->add_option("--B", crit.draws, "simulation draws");
  crit_cmd->add_option("--seed", crit.seed, "random seed");
  add_global_options(crit_cmd, globals);

  CLI::App* plm_cmd = app.add_subcommand("plm", "partially linear model with robust intervals for theta");
  add_data_options(plm_cmd, data_opts, true);
  add_basis_options(plm_cmd, basis_opts);
  add_global_options(plm_cmd, globals);
  plm_cmd->add_option("--alpha", plm.alpha, "significance level");
  plm_cmd->add_option("--B", plm.draws, "simulation draws");
  plm_cmd->add_option("--seed", plm.seed, "random seed");
  plm_cmd->add_option("--kappa", plm.kappa, "standard errors: hc0 or cross_term_full");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo coverage study");
  sim_cmd->add_option("--model", sim_opts.model, "design 1, 2 or 3");
  sim_cmd->add_option("--n", sim_opts.n, "sample size");
  sim_cmd->add_option("--reps", sim_opts.reps, "replications");
  sim_cmd->add_option("--B", sim_opts.draws, "Gaussian draws per pointwise critical value");
  sim_cmd->add_option("--B-boot", sim_opts.boot_draws, "bootstrap draws per band");
  sim_cmd->add_option("--alpha", sim_opts.alpha, "significance level");
  sim_cmd->add_option("--seed", sim_opts.seed, "master seed");
  sim_cmd->add_flag("--homoskedastic", sim_opts.homoskedastic, "unit error variance");
  sim_cmd->add_option("--grid-size", sim_opts.grid_size, "band grid points");
  sim_cmd->add_option("--band-support", sim_opts.band_support, "band range lower,upper")
      ->delimiter(',')
      ->expected(2);
  sim_cmd->add_option("--eval", sim_opts.points, "evaluation points")->delimiter(',');
  sim_cmd->add_option("--k-list", sim_opts.k_list, "explicit candidate set")->delimiter(',');
  sim_cmd->add_flag("--tolerate-failures", sim_opts.tolerate_failures, "skip failing replications");
  sim_cmd->add_flag("--no-bands", sim_opts.no_bands, "skip uniform bands");
  sim_cmd->add_flag("--replications", sim_opts.replications, "include per-replication records in JSON");
  add_global_options(sim_cmd, globals);

  try {
    std::vector<std::string> merged = merge_config(args, app);
    std::vector<std::string> reversed(merged.rbegin(), merged.rend() - 1);  // CLI11 wants reversed, sans argv[0]
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit_or_ci(fit_cmd, false, data_opts, basis_opts, inf, globals, out);
    if (ci_cmd->parsed()) return cmd_fit_or_ci(ci_cmd, true, data_opts, basis_opts, inf, globals, out);
    if (crit_cmd->parsed()) return cmd_critvals(crit_cmd, crit, globals, out);
    if (plm_cmd->parsed()) return cmd_plm(plm_cmd, data_opts, basis_opts, plm, globals, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim_cmd, sim_opts, globals, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kInputError;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) args.emplace_back("sband");
  return run(args, out, err);
}

}  // namespace sband::cli

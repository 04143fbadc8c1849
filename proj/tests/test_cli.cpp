#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sband/cli.hpp"
#include "sband/errors.hpp"

using namespace sband;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run sband_run(std::vector<std::string> args) {
  args.insert(args.begin(), "sband");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sband_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// y = theta w + cos(4x) + noise, w = sin(3x) + v
fs::path synthetic_csv(const fs::path& dir, double noise, double theta = 2.0, std::size_t n = 200) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal;
  const fs::path path = dir / "data.csv";
  std::ofstream f(path);
  f.precision(17);
  f << "y,x,w\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u(rng);
    const double w = std::sin(3.0 * x) + normal(rng);
    f << theta * w + std::cos(4.0 * x) + noise * normal(rng) << "," << x << "," << w << "\n";
  }
  return path;
}

}  // namespace

TEST_CASE("csv parsing: header, comments, blank lines") {
  std::istringstream in("# source=test\ny,x\n1.5,0.25\n\n2,0.75\n");
  const auto t = cli::read_csv(in);
  CHECK(t.header == std::vector<std::string>{"y", "x"});
  CHECK(t.column("x") == std::vector<double>{0.25, 0.75});
  CHECK_THROWS_AS(t.column("w"), InputError);
}

TEST_CASE("csv errors cite the line number") {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      cli::read_csv(in, "data.csv");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("y,x\n1,2\n3,abc\n").find("line 3") != std::string::npos);
  CHECK(message("y,x\n1,2\n3\n").find("line 3") != std::string::npos);
  CHECK(message("y,x\n1,2\n4,5,6\n").find("line 3") != std::string::npos);
  CHECK(!message("").empty());
}

TEST_CASE("config files: key=value with comments and line-numbered errors") {
  const auto dir = scratch("config_parse");
  std::ofstream(dir / "a.cfg") << "# comment\nalpha = 0.1\n--seed=5\n";
  const auto cfg = cli::read_config_file(dir / "a.cfg");
  CHECK(cfg.at("alpha") == "0.1");
  CHECK(cfg.at("seed") == "5");
  std::ofstream(dir / "b.cfg") << "alpha=0.1\nnot a pair\n";
  try {
    cli::read_config_file(dir / "b.cfg");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("ci reports nested intervals with c_hat >= 1.96 and is byte-reproducible") {
  const auto dir = scratch("ci");
  const auto data = synthetic_csv(dir, 0.3);
  const std::vector<std::string> args{"ci", "-i", data.string(), "--x", "0.5", "--alpha", "0.05", "--k-rule", "sim",
                                      "--seed", "9"};
  auto first = args, second = args;
  first.insert(first.end(), {"--out", (dir / "a").string()});
  second.insert(second.end(), {"--out", (dir / "b").string()});
  REQUIRE(sband_run(first).code == 0);
  REQUIRE(sband_run(second).code == 0);
  const std::string a = slurp(dir / "a" / "report.json");
  CHECK(a == slurp(dir / "b" / "report.json"));

  const auto report = Json::parse(a);
  CHECK(report["seed"] == 9);
  CHECK(report["config"]["seed"] == "9");
  const auto& point = report["points"][0];
  CHECK(point["critical_value"]["c_hat"].get<double>() >= 1.96);
  CHECK(point["robust_ci"][0].get<double>() <= point["standard_ci"][0].get<double>());
  CHECK(point["robust_ci"][1].get<double>() >= point["standard_ci"][1].get<double>());
}

TEST_CASE("ci --band writes band.csv with its schema") {
  const auto dir = scratch("band");
  const auto data = synthetic_csv(dir, 0.3);
  REQUIRE(sband_run({"ci", "-i", data.string(), "--x", "0.5", "--band", "--B-boot", "200", "--grid-size", "21",
                     "--out", dir.string()})
              .code == 0);
  std::ifstream band(dir / "band.csv");
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(band, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      CHECK(line == "x,center,lower,upper");
      header = true;
      continue;
    }
    double x, c, lo, hi;
    char sep;
    std::istringstream row(line);
    row >> x >> sep >> c >> sep >> lo >> sep >> hi;
    CHECK((lo <= c && c <= hi));
    ++rows;
  }
  CHECK(rows == 21);
}

TEST_CASE("malformed data row exits 2 naming the row") {
  const auto dir = scratch("malformed");
  std::ofstream(dir / "bad.csv") << "y,x\n1,0.1\n2,0.2\n3,oops\n";
  const auto r = sband_run({"fit", "-i", (dir / "bad.csv").string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 4") != std::string::npos);
}

TEST_CASE("argument errors exit 2") {
  CHECK(sband_run({}).code == 2);
  CHECK(sband_run({"frobnicate"}).code == 2);
  CHECK(sband_run({"simulate", "--reps", "0", "--out", scratch("reps0").string()}).code == 2);
  CHECK(sband_run({"critvals", "--out", scratch("none").string()}).code == 2);
  CHECK(sband_run({"critvals", "--ses", "1,2", "--alpha", "1.5", "--out", scratch("alpha").string()}).code == 2);
}

TEST_CASE("numerical failures exit 3 and name K") {
  // data confined to [0, 0.3] plus one point at 1 leave most knot intervals of [0, 1] empty
  const auto dir = scratch("numerical");
  std::ofstream f(dir / "gap.csv");
  f << "y,x\n";
  for (int i = 0; i < 40; ++i) f << i % 3 << "," << 0.3 * i / 39.0 << "\n";
  f << "1,1\n";
  f.close();
  const auto r = sband_run({"fit", "-i", (dir / "gap.csv").string(), "--k-rule", "explicit", "--k-list", "10",
                            "--support", "0,1", "--out", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("K=10") != std::string::npos);
}

TEST_CASE("fewer observations than basis functions is an input error") {
  const auto dir = scratch("small");
  std::ofstream f(dir / "small.csv");
  f << "y,x\n";
  for (int i = 0; i < 12; ++i) f << i % 3 << "," << i / 11.0 << "\n";
  f.close();
  CHECK(sband_run({"fit", "-i", (dir / "small.csv").string(), "--k-rule", "explicit", "--k-list", "15", "--out",
                   dir.string()})
            .code == 2);
}

TEST_CASE("critvals: one standard error gives the normal quantile") {
  const auto dir = scratch("crit1");
  REQUIRE(sband_run({"critvals", "--ses", "1", "--alpha", "0.05", "--B", "20000", "--out", dir.string()}).code == 0);
  const auto r = Json::parse(slurp(dir / "critvals.json"));
  const double c = r["result"]["c_hat"], se = r["result"]["mc_se"];
  CHECK(std::abs(c - 1.959964) <= 3.0 * se);
  CHECK(r.contains("config"));
}

TEST_CASE("critvals --sigma identity matches the independent-max quantile") {
  const auto dir = scratch("crit5");
  std::ofstream f(dir / "identity5.csv");
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) f << (i == j ? 1 : 0) << (j == 4 ? "\n" : ",");
  f.close();
  REQUIRE(sband_run({"critvals", "--sigma", (dir / "identity5.csv").string(), "--B", "50000", "--out", dir.string()})
              .code == 0);
  const auto r = Json::parse(slurp(dir / "critvals.json"));
  const double c = r["result"]["c_hat"], se = r["result"]["mc_se"];
  CHECK(std::abs(c - 2.5690) <= 3.0 * se + 1e-3);
}

TEST_CASE("critvals rejects a non-PSD sigma with exit 2") {
  const auto dir = scratch("critbad");
  std::ofstream(dir / "bad.csv") << "1,2\n2,1\n";
  CHECK(sband_run({"critvals", "--sigma", (dir / "bad.csv").string(), "--out", dir.string()}).code == 2);
  CHECK(sband_run({"critvals", "--ses", "1", "--sigma", (dir / "bad.csv").string(), "--out", dir.string()}).code == 2);
}

TEST_CASE("config file values apply but flags win") {
  const auto dir = scratch("merge");
  std::ofstream(dir / "run.cfg") << "alpha=0.10\nB=20000\nseed=3\n";
  REQUIRE(sband_run({"critvals", "--ses", "1", "--config", (dir / "run.cfg").string(), "--seed", "8", "--out",
                     dir.string()})
              .code == 0);
  const auto r = Json::parse(slurp(dir / "critvals.json"));
  CHECK(r["config"]["alpha"] == "0.10");
  CHECK(r["config"]["B"] == "20000");
  CHECK(r["config"]["seed"] == "8");
  CHECK(r["result"]["c_hat"].get<double>() == doctest::Approx(1.645).epsilon(0.02));
}

TEST_CASE("output directory falls back to the environment variable") {
  const auto dir = scratch("env");
  ::setenv("SBAND_OUTPUT_DIR", dir.string().c_str(), 1);
  const auto r = sband_run({"critvals", "--ses", "1"});
  ::unsetenv("SBAND_OUTPUT_DIR");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "critvals.json"));
}

TEST_CASE("plm intervals contain the true theta in a low-noise run") {
  const auto dir = scratch("plm");
  // 60 interior knots need enough observations per knot interval to clear the leverage floor
  const auto data = synthetic_csv(dir, 0.05, 2.0, 1000);
  REQUIRE(sband_run({"plm", "-i", data.string(), "--w-col", "w", "--k-list", "10,30,60", "--seed", "4", "--out",
                     dir.string()})
              .code == 0);
  const auto r = Json::parse(slurp(dir / "plm_report.json"));
  REQUIRE(r["per_k"].size() == 3);
  CHECK(r["c_hat"].get<double>() >= 1.9);
  for (const auto& row : r["per_k"]) {
    CHECK(row["ci_robust"][0].get<double>() <= 2.0);
    CHECK(row["ci_robust"][1].get<double>() >= 2.0);
    CHECK(row["ci_standard"][0].get<double>() <= 2.0);
    CHECK(row["ci_standard"][1].get<double>() >= 2.0);
  }
  CHECK(r["config"]["k-list"] == "10,30,60");
  CHECK(sband_run({"plm", "-i", data.string(), "--w-col", "missing", "--out", dir.string()}).code == 2);
}

TEST_CASE("simulate writes the coverage table") {
  const auto dir = scratch("simulate");
  const auto r = sband_run({"simulate", "--model", "1", "--n", "200", "--reps", "200", "--seed", "7", "--B", "200",
                            "--B-boot", "200", "--out", dir.string()});
  REQUIRE(r.code == 0);
  std::ifstream csv(dir / "coverage.csv");
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(csv, line))
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  REQUIRE(!rows.empty());
  CHECK(rows[0] == "model,method,target,coverage,avg_length");
  // 3 methods x (4 points + uniform)
  CHECK(rows.size() == 1 + 3 * 5);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[i]);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 5);
    CHECK(cells[0] == "1");
    for (const auto& cell : cells) CHECK(!cell.empty());
    const double coverage = std::stod(cells[3]);
    CHECK((coverage >= 0.0 && coverage <= 1.0));
    CHECK(std::stod(cells[4]) > 0.0);
  }
  const auto report = Json::parse(slurp(dir / "sim_report.json"));
  CHECK(report["config"]["master_seed"] == 7);
  CHECK(report["completed"] == 200);
}

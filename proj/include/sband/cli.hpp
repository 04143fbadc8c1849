#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sband/series_fit.hpp"

namespace sband::cli {

/// Stable process exit codes.
enum ExitCode : int { kSuccess = 0, kInputError = 2, kNumericalError = 3 };

/// Header row plus numeric columns. Parse errors throw InputError citing the line number.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in, const std::string& source = "<input>");
CsvTable read_csv_file(const std::filesystem::path& path);

/// Loads y and x (and w when `w_col` is set) by column name.
Dataset load_dataset(const std::filesystem::path& path, const std::string& y_col, const std::string& x_col,
                     const std::optional<std::string>& w_col = std::nullopt);

/// Square numeric matrix from CSV; an optional non-numeric first row is treated as a header.
Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path);

/// Parses a flat key=value file ('#' comments). Throws InputError with line numbers.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Entry point. Commands: fit, ci, critvals, plm, simulate.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sband::cli

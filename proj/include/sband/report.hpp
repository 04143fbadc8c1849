#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sband/plm.hpp"
#include "sband/sim_harness.hpp"
#include "sband/suptstat.hpp"

namespace sband {

using Json = nlohmann::ordered_json;

Json to_json(const CriticalValueResult& result);
Json to_json(const Band& band);
Json to_json(const Interval& interval);
Json to_json(const CrossKCorrelation& sigma);
Json to_json(const PlmRobustResult& result);
Json to_json(const sim::SimConfig& config);
Json to_json(const sim::SimReport& report, bool include_replications = false);

/// Key/value lines written as "# key=value" comments ahead of a CSV header.
using CsvPreamble = std::vector<std::pair<std::string, std::string>>;

/// Columns x,center,lower,upper.
void write_band_csv(std::ostream& out, const Band& band, const CsvPreamble& preamble = {});

/// Columns model,method,target,coverage,avg_length.
void write_coverage_csv(std::ostream& out, const sim::SimReport& report, const CsvPreamble& preamble = {});

}  // namespace sband

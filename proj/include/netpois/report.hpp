#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "netpois/harness.hpp"

namespace netpois {

nlohmann::json report_to_json(const ExperimentReport& report);

/// One row per (cell, seed).
void write_results_csv(std::ostream& out, const ExperimentReport& report);

/// One JSON object per stage entry.
void write_stage_log(std::ostream& out, const ExperimentReport& report);

/// Writes report.json, results.csv and stages.log into `dir` (created if
/// missing). Output depends only on the report.
void emit_report(const ExperimentReport& report, const std::string& dir);

}  // namespace netpois

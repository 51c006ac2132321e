#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "simulation.hpp"

namespace cci {

using Json = nlohmann::ordered_json;

inline const char* library_version() { return "0.1.0"; }

// Estimate reports: one CSV row per (level or contrast) x estimator, and a
// versioned JSON document with full provenance.
std::string estimate_report_csv(const AnalysisResult& result,
                                const std::vector<std::string>& level_labels);
Json estimate_report_json(const AnalysisResult& result,
                          const std::vector<std::string>& level_labels, const Json& config_echo);

// Monte Carlo report: machine CSV, a text rendering that mirrors the
// simulation tables, and JSON with provenance.
std::string mc_report_csv(const McReport& report);
std::string mc_report_text(const McReport& report);
Json mc_report_json(const McReport& report, const Json& config_echo);

Json truth_json(const TruthValues& truth);

} // namespace cci

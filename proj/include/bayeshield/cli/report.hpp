#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace bayeshield::cli {

//! Machine-readable record of one CLI run. `config` holds every effective
//! parameter, defaults included, so `bayeshield replay` can recompute
//! `results` from the report alone (plus the dataset file it fingerprints).
//!
//! On disk: {"format": "bayeshield-report", "version": 1, "command",
//! "input_fingerprint", "config", "results", "warnings",
//! "timing": {"wall_seconds"}}. Doubles are written with round-trip precision.
struct RunReport
{
  std::string command;
  std::string input_fingerprint;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;

  bool operator==(const RunReport&) const = default;
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

std::string serialize_report(const RunReport& report);
RunReport parse_report(const std::string& text);

void save_report(const RunReport& report, const std::filesystem::path& path);
RunReport load_report(const std::filesystem::path& path);

//! "sha256:" followed by the lowercase hex digest of `bytes`.
std::string fingerprint(const std::string& bytes);

} // namespace bayeshield::cli

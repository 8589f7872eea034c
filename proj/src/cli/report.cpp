#include "bayeshield/cli/report.hpp"

#include "bayeshield/cli/dataset_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

namespace bayeshield::cli {

namespace {
constexpr const char* kReportFormat = "bayeshield-report";
constexpr int kReportVersion = 1;
} // namespace

nlohmann::json report_to_json(const RunReport& report)
{
  return { { "format", kReportFormat },
           { "version", kReportVersion },
           { "command", report.command },
           { "input_fingerprint", report.input_fingerprint },
           { "config", report.config },
           { "results", report.results },
           { "warnings", report.warnings },
           { "timing", { { "wall_seconds", report.wall_seconds } } } };
}

RunReport report_from_json(const nlohmann::json& doc)
{
  try {
    if (doc.value("format", std::string()) != kReportFormat) {
      throw InputError("not a bayeshield report");
    }
    if (doc.at("version").get<int>() != kReportVersion) {
      throw InputError("unsupported report version " + doc.at("version").dump());
    }
    RunReport report;
    report.command = doc.at("command").get<std::string>();
    report.input_fingerprint = doc.at("input_fingerprint").get<std::string>();
    report.config = doc.at("config");
    report.results = doc.at("results");
    report.warnings = doc.at("warnings").get<std::vector<std::string>>();
    report.wall_seconds = doc.at("timing").at("wall_seconds").get<double>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

std::string serialize_report(const RunReport& report)
{
  return report_to_json(report).dump(2) + "\n";
}

RunReport parse_report(const std::string& text)
{
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
  return report_from_json(doc);
}

void save_report(const RunReport& report, const std::filesystem::path& path)
{
  write_text_file(path, serialize_report(report));
}

RunReport load_report(const std::filesystem::path& path)
{
  return parse_report(read_text_file(path));
}

std::string fingerprint(const std::string& bytes)
{
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string out = "sha256:";
  char hex[3];
  for (unsigned int k = 0; k < length; ++k) {
    std::snprintf(hex, sizeof hex, "%02x", digest[k]);
    out += hex;
  }
  return out;
}

} // namespace bayeshield::cli

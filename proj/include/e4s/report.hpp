#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace e4s {

enum class Dimension { Adherence = 0, Consistency = 1, Naturalness = 2 };

inline constexpr std::array<Dimension, 3> kDimensions{Dimension::Adherence, Dimension::Consistency,
                                                      Dimension::Naturalness};

std::string_view to_string(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view s);

/// (similarity - 1) * 100.
double offset_percent(double similarity);

struct DimensionResult {
  Dimension dimension = Dimension::Adherence;
  double raw_score = 0.0;
  double similarity = 0.0;
  double offset_percent = 0.0;
  std::map<std::string, std::string> artifacts;  // name -> path
  nlohmann::json detail = nlohmann::json::object();

  /// Fills the offset from the similarity.
  static DimensionResult make(Dimension d, double raw, double similarity);
};

struct E4sReport {
  std::string dataset;
  bool reference = false;
  std::array<std::optional<DimensionResult>, 3> dimensions;
  std::optional<double> e4s;
  // Positions among simulations; absent for the reference and for missing values.
  std::array<std::optional<std::size_t>, 3> positions;
  std::optional<std::size_t> position;

  const std::optional<DimensionResult>& at(Dimension d) const { return dimensions[static_cast<std::size_t>(d)]; }
  std::optional<DimensionResult>& at(Dimension d) { return dimensions[static_cast<std::size_t>(d)]; }
};

/// Unweighted mean. Throws DataError on a non-finite input.
double aggregate_e4s(double adherence_sim, double consistency_sim, double naturalness_sim);

/// Competition ranking ("1224") by descending value; equal values share the
/// smaller position. The reference is excluded.
std::vector<std::size_t> competition_ranks(std::span<const double> values);

/// Fills per-dimension and overall positions of every simulation report.
void rank_datasets(std::vector<E4sReport>& reports);

struct Failure {
  std::string dataset;
  std::string dimension;  // dimension name, or "corpus"
  std::string kind;       // config, data or provider
  std::string message;
};

struct RunReport {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<E4sReport> datasets;
  std::vector<Failure> failures;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const RunReport& report);
/// Inverse of to_json. Throws DataError on a malformed document.
RunReport run_report_from_json(const nlohmann::json& j);

enum class ReportFormat { Json, Csv, Markdown };

std::optional<ReportFormat> parse_report_format(std::string_view s);

/// Writes report.json, consistency.csv, naturalness.csv, e4s.csv, summary.md
/// and, when there are failures, failures.json. Returns the written paths.
/// Throws ConfigError if the directory cannot be written.
std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::filesystem::path& out_dir,
                                               const std::set<ReportFormat>& formats = {
                                                   ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown});

/// Three-decimal fixed formatting used by the CSV and markdown renderers.
std::string format3(double v);

}  // namespace e4s

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lesionmetrics/overlap.hpp"
#include "lesionmetrics/stats.hpp"

namespace lesionmetrics {

inline constexpr const char* kCsvSchema = "lesionmetrics-v1";

struct ManifestRow {
  std::string case_id;
  std::filesystem::path gt;
  std::filesystem::path pred;
  int fold = 0;
  int repeat = 0;
  std::string config;
};

/// CSV with header `case_id,gt,pred,fold,repeat,config`. Relative paths are resolved
/// against the manifest's directory. Lines starting with '#' are ignored.
struct CaseManifest {
  std::vector<ManifestRow> rows;

  static CaseManifest read(const std::filesystem::path& path);
  static CaseManifest parse(std::istream& in, const std::filesystem::path& base_dir = {});
  /// Throws ValidationError on a repeated (case_id, repeat, config) triple.
  void validate() const;
};

struct EvaluateOptions {
  EvalOptions metrics;
  unsigned jobs = 1;
  /// Only rows of this configuration are evaluated when set.
  std::optional<std::string> config;
  bool keep_match_tables = false;
};

struct CaseError {
  std::string case_id;
  std::string config;
  int fold = 0;
  int repeat = 0;
  std::string reason;
};

struct MatchTableRecord {
  std::string case_id;
  std::string config;
  int repeat = 0;
  std::int32_t label = 0;
  LesionMatchTable table;
};

struct EvaluationOutput {
  EvalOptions options;
  /// Sorted by (case_id, repeat, config); classes in label order.
  std::vector<CaseMetrics> cases;
  std::vector<CaseError> errors;
  std::vector<MatchTableRecord> match_tables;
};

/// Evaluates every manifest row, `jobs` at a time. Failing cases become error records.
EvaluationOutput evaluate(const CaseManifest& manifest, const EvaluateOptions& opts);

/// Metrics of one case, optionally collecting per-class lesion match tables.
CaseMetrics evaluate_case(const ManifestRow& row, const EvalOptions& opts,
                          std::vector<MatchTableRecord>* tables = nullptr);

/// `%.6g`, with "NaN", "inf" and "-inf" for non-finite values.
std::string format_number(double v);
double parse_number(const std::string& s);

/// "PT" for 1, "LN" for 2, the number otherwise.
std::string class_name(std::int32_t label);

void write_metrics_csv(std::ostream& out, const EvaluationOutput& eval);
nlohmann::json metrics_json(const EvaluationOutput& eval);
nlohmann::json match_tables_json(const EvaluationOutput& eval);

struct MetricsTable {
  EvalOptions options;
  std::vector<CaseMetrics> cases;
};

/// Reads a CSV written by write_metrics_csv; error rows are skipped.
MetricsTable read_metrics_csv(std::istream& in);
MetricsTable read_metrics_csv(const std::filesystem::path& path);

struct ComparisonRow {
  std::int32_t label = 0;
  std::string metric;
  double mean_a = 0.0;
  double mean_b = 0.0;
  /// NaN when the paired sample is degenerate.
  double p_value = 0.0;
  std::size_t n_effective = 0;
  bool exact = false;
  bool significant = false;
};

struct ComparisonReport {
  std::string name_a = "A";
  std::string name_b = "B";
  EvalOptions options;
  std::size_t patients = 0;
  std::vector<ComparisonRow> rows;
};

/// Per-patient reduction of both tables followed by a paired test per class and metric.
/// Throws ValidationError when the case sets or fold assignments differ, or when the
/// tables were produced with different evaluation options.
ComparisonReport compare(const MetricsTable& a, const MetricsTable& b,
                         const std::string& name_a = "A", const std::string& name_b = "B");

nlohmann::json to_json(const ComparisonReport& report);
/// One line per row: "LN Dice 0.734 vs 0.758, p = 0.019".
std::string render_text(const ComparisonReport& report);

/// Human-readable metric name used in rendered reports.
std::string metric_display_name(const std::string& metric);

/// Writes a JSON value with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace lesionmetrics

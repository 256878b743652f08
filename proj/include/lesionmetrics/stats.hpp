#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lesionmetrics/overlap.hpp"

namespace lesionmetrics {

/// Per-patient scores of two configurations, aligned by index.
struct PairedSample {
  std::vector<std::string> ids;
  std::vector<double> a;
  std::vector<double> b;

  /// Throws ValidationError on length mismatch or duplicate ids.
  void validate() const;
};

enum class WilcoxonMethod { Auto, Exact, Normal };

/// Sample sizes up to this use exact enumeration under Auto.
inline constexpr std::size_t kWilcoxonExactMaxN = 25;

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  /// Pairs left after removing NaN pairs and zero differences.
  std::size_t n_effective = 0;
  double p_value = 1.0;
  bool exact = false;
};

/// Two-sided Wilcoxon signed-rank test on a - b. Pairs with a NaN are removed, zero
/// differences are dropped and tied magnitudes share their average rank. Throws
/// DegenerateSample when no nonzero difference remains.
WilcoxonResult wilcoxon_signed_rank(const PairedSample& s,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

/// Significance threshold for reports.
inline constexpr double kSignificanceLevel = 0.05;
[[nodiscard]] inline bool is_significant(double p) { return p < kSignificanceLevel; }

/// Named view of one double-valued field of ClassMetrics.
struct MetricField {
  const char* name;
  double ClassMetrics::*member;
};

/// dice, adaptive_dice, adaptive_dice_normalized, lesionwise_dice, sds, msd, hd95,
/// sensitivity, precision.
const std::vector<MetricField>& metric_fields();

/// Key of one aggregated series: (class label, metric name).
using MetricKey = std::pair<std::int32_t, std::string>;

struct PatientSeries {
  /// Mean over a patient's repeats, NaN entries excluded (NaN if every repeat is NaN).
  std::map<std::string, double> per_patient;
  /// Mean over patients with a finite-or-infinite (non-NaN) score.
  double mean = 0.0;
  std::size_t n = 0;
};

struct AggregatedRuns {
  std::map<MetricKey, PatientSeries> series;
  std::map<std::string, int> fold_of_case;
  std::size_t rows = 0;
};

/// Reduces rows (case × fold × repeat) to per-patient means per class and metric.
/// Throws ValidationError when a case appears in several folds or a (case, repeat)
/// pair repeats.
AggregatedRuns aggregate_runs(const std::vector<CaseMetrics>& rows);

/// Mean of the non-NaN values; NaN when there are none.
double nan_mean(const std::vector<double>& v);

}  // namespace lesionmetrics

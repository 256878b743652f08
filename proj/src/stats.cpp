#include "lesionmetrics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace lesionmetrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Average ranks (1-based) of the absolute values, ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& magnitudes) {
  const std::size_t n = magnitudes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return magnitudes[x] < magnitudes[y]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Exact null distribution of W+ over doubled (integer) ranks.
double exact_two_sided(const std::vector<double>& ranks, double w_plus) {
  std::vector<long> doubled(ranks.size());
  long total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::lround(2.0 * ranks[i]);
    total += doubled[i];
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    for (long s = reach; s >= 0; --s) {
      if (count[static_cast<std::size_t>(s)] != 0.0) {
        count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      }
    }
    reach += r;
  }
  const double outcomes = std::ldexp(1.0, static_cast<int>(ranks.size()));
  const long w = std::lround(2.0 * w_plus);
  double lower = 0.0;
  double upper = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= w) lower += count[static_cast<std::size_t>(s)];
    if (s >= w) upper += count[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / outcomes);
}

double normal_two_sided(const std::vector<double>& magnitudes, double w_plus) {
  const double n = static_cast<double>(magnitudes.size());
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;

  auto sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::fabs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

void PairedSample::validate() const {
  if (a.size() != b.size() || (!ids.empty() && ids.size() != a.size())) {
    throw ValidationError("paired sample columns have different lengths");
  }
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate case id '" + id + "'");
  }
}

WilcoxonResult wilcoxon_signed_rank(const PairedSample& s, WilcoxonMethod method) {
  s.validate();
  std::vector<double> diffs;
  for (std::size_t i = 0; i < s.a.size(); ++i) {
    const double d = s.a[i] - s.b[i];
    if (std::isnan(d) || d == 0.0) continue;
    diffs.push_back(d);
  }
  if (diffs.empty()) throw DegenerateSample("degenerate sample: all paired differences are zero");

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(),
                 [](double d) { return std::fabs(d); });
  const auto ranks = average_ranks(magnitudes);

  WilcoxonResult r;
  r.n_effective = diffs.size();
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    (diffs[i] > 0.0 ? r.w_plus : r.w_minus) += ranks[i];
  }
  r.exact = method == WilcoxonMethod::Exact ||
            (method == WilcoxonMethod::Auto && r.n_effective <= kWilcoxonExactMaxN);
  if (r.exact && r.n_effective > 60) {
    throw RangeError("exact Wilcoxon enumeration is limited to 60 pairs");
  }
  r.p_value = r.exact ? exact_two_sided(ranks, r.w_plus) : normal_two_sided(magnitudes, r.w_plus);
  return r;
}

const std::vector<MetricField>& metric_fields() {
  static const std::vector<MetricField> fields = {
      {"dice", &ClassMetrics::dice},
      {"adaptive_dice", &ClassMetrics::adaptive_dice},
      {"adaptive_dice_normalized", &ClassMetrics::adaptive_dice_normalized},
      {"lesionwise_dice", &ClassMetrics::lesionwise_dice},
      {"sds", &ClassMetrics::sds},
      {"msd", &ClassMetrics::msd},
      {"hd95", &ClassMetrics::hd95},
      {"sensitivity", &ClassMetrics::sensitivity},
      {"precision", &ClassMetrics::precision},
  };
  return fields;
}

double nan_mean(const std::vector<double>& v) {
  double total = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    total += x;
    ++n;
  }
  return n == 0 ? kNaN : total / static_cast<double>(n);
}

AggregatedRuns aggregate_runs(const std::vector<CaseMetrics>& rows) {
  AggregatedRuns out;
  out.rows = rows.size();

  std::set<std::pair<std::string, int>> seen_runs;
  std::map<MetricKey, std::map<std::string, std::vector<double>>> values;
  for (const auto& row : rows) {
    auto [it, inserted] = out.fold_of_case.emplace(row.case_id, row.fold);
    if (!inserted && it->second != row.fold) {
      throw ValidationError("inconsistent fold assignment for case '" + row.case_id + "'");
    }
    if (!seen_runs.emplace(row.case_id, row.repeat).second) {
      throw ValidationError("duplicate repeat " + std::to_string(row.repeat) + " for case '" +
                            row.case_id + "'");
    }
    for (const auto& cls : row.classes) {
      for (const auto& f : metric_fields()) {
        values[{cls.label, f.name}][row.case_id].push_back(cls.*(f.member));
      }
    }
  }

  for (auto& [key, by_case] : values) {
    PatientSeries series;
    std::vector<double> means;
    for (auto& [case_id, repeats] : by_case) {
      const double m = nan_mean(repeats);
      series.per_patient.emplace(case_id, m);
      means.push_back(m);
    }
    series.mean = nan_mean(means);
    series.n = static_cast<std::size_t>(
        std::count_if(means.begin(), means.end(), [](double x) { return !std::isnan(x); }));
    out.series.emplace(key, std::move(series));
  }
  return out;
}

}  // namespace lesionmetrics

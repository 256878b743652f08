#include "lesionmetrics/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "lesionmetrics/io.hpp"

namespace lesionmetrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  const auto end = s.find_last_not_of(ws);
  s.erase(end == std::string::npos ? 0 : end + 1);
  return s;
}

int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("invalid ") + what + " '" + s + "'");
  }
}

const char* kManifestHeader = "case_id,gt,pred,fold,repeat,config";

const std::vector<std::string>& count_columns() {
  static const std::vector<std::string> cols = {"gt_lesions", "pred_lesions", "tp_gt",
                                                "fn",         "tp_pred",      "fp"};
  return cols;
}

std::int64_t ClassMetrics::*count_member(std::size_t i) {
  static constexpr std::int64_t ClassMetrics::*members[] = {
      &ClassMetrics::gt_lesions, &ClassMetrics::pred_lesions, &ClassMetrics::tp_gt,
      &ClassMetrics::fn,         &ClassMetrics::tp_pred,      &ClassMetrics::fp};
  return members[i];
}

std::string options_line(const EvalOptions& o) {
  return "# connectivity=" + std::to_string(neighbor_count(o.connectivity)) +
         " tolerance_mm=" + format_number(o.tolerance_mm) +
         " numerator_constant=" + format_number(o.numerator_constant);
}

nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return parse_number(format_number(v));
  return format_number(v);
}

nlohmann::json conventions_json(const EvalOptions& o) {
  return {
      {"connectivity", neighbor_count(o.connectivity)},
      {"tolerance_mm", number_json(o.tolerance_mm)},
      {"numerator_constant", number_json(o.numerator_constant)},
      {"surface", "exposed voxel faces, area-weighted"},
      {"hd95", "max of directed area-weighted 95th percentiles"},
      {"adaptive_dice",
       "binarized epsilon-free volume-aware ratio C*sum(w*g*pred)/(sum(pred)+sum(w*g)); "
       "normalized variant divides by the perfect-prediction value (derived metric)"},
      {"lesionwise_dice", "any-overlap matching; unmatched predicted lesions score 0"},
      {"wilcoxon",
       "two-sided; exact for n<=25, normal approximation with tie correction and 0.5 "
       "continuity correction otherwise"},
      {"zero_differences", "dropped (Wilcoxon)"},
      {"nan_policy", "pairwise deletion"},
  };
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double parse_number(const std::string& s) {
  if (s == "NaN" || s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("invalid number '" + s + "'");
  }
}

std::string class_name(std::int32_t label) {
  if (label == LabelVolume::kPrimaryTumor) return "PT";
  if (label == LabelVolume::kLymphNode) return "LN";
  return std::to_string(label);
}

CaseManifest CaseManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  return parse(in, path.parent_path());
}

CaseManifest CaseManifest::parse(std::istream& in, const std::filesystem::path& base_dir) {
  CaseManifest m;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kManifestHeader) {
        throw ValidationError(std::string("manifest header must be '") + kManifestHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) {
      throw ValidationError("manifest line " + std::to_string(line_no) + " needs 6 fields");
    }
    ManifestRow r;
    r.case_id = trim(f[0]);
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path = trim(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    r.gt = resolve(f[1]);
    r.pred = resolve(f[2]);
    r.fold = parse_int(trim(f[3]), "fold");
    r.repeat = parse_int(trim(f[4]), "repeat");
    r.config = trim(f[5]);
    if (r.case_id.empty()) throw ValidationError("empty case_id on manifest line " + std::to_string(line_no));
    m.rows.push_back(std::move(r));
  }
  if (!header_seen) throw ValidationError("manifest is empty");
  m.validate();
  return m;
}

void CaseManifest::validate() const {
  std::set<std::tuple<std::string, int, std::string>> seen;
  for (const auto& r : rows) {
    if (!seen.emplace(r.case_id, r.repeat, r.config).second) {
      throw ValidationError("duplicate manifest entry (" + r.case_id + ", repeat " +
                            std::to_string(r.repeat) + ", " + r.config + ")");
    }
  }
}

CaseMetrics evaluate_case(const ManifestRow& row, const EvalOptions& opts,
                          std::vector<MatchTableRecord>* tables) {
  const auto gt = load_label_volume(row.gt);
  const auto pred_raw = load_label_volume(row.pred);
  require_same_grid(gt, pred_raw);
  const auto a = gt.spacing().as_array();
  const auto b = pred_raw.spacing().as_array();
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::fabs(a[i] - b[i]) > 1e-6 * std::max(1.0, std::fabs(a[i]))) {
      throw DimensionMismatch("spacing mismatch between ground truth and prediction");
    }
  }
  const LabelVolume pred(
      pred_raw.dims(), gt.spacing(),
      std::vector<std::int32_t>(pred_raw.data().begin(), pred_raw.data().end()), pred_raw.labels());

  CaseMetrics cm{row.case_id, row.config, row.fold, row.repeat, {}};
  for (auto label : gt.labels()) {
    const auto g = extract_class(gt, label);
    const auto p = pred.declares(label) ? extract_class(pred, label) : BinaryMask(gt.dims(), gt.spacing());
    cm.classes.push_back(evaluate_class(g, p, label, opts));
    if (tables != nullptr) {
      tables->push_back({row.case_id, row.config, row.repeat, label,
                         detection_metrics(g, p, opts.connectivity).table});
    }
  }
  return cm;
}

EvaluationOutput evaluate(const CaseManifest& manifest, const EvaluateOptions& opts) {
  manifest.validate();
  std::vector<const ManifestRow*> todo;
  for (const auto& r : manifest.rows) {
    if (!opts.config || r.config == *opts.config) todo.push_back(&r);
  }

  struct Slot {
    std::optional<CaseMetrics> metrics;
    std::optional<CaseError> error;
    std::vector<MatchTableRecord> tables;
  };
  std::vector<Slot> slots(todo.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const auto& row = *todo[i];
      try {
        slots[i].metrics = evaluate_case(row, opts.metrics,
                                         opts.keep_match_tables ? &slots[i].tables : nullptr);
      } catch (const std::exception& e) {
        slots[i].error = CaseError{row.case_id, row.config, row.fold, row.repeat, e.what()};
      }
    }
  };
  const unsigned jobs = std::max(1U, std::min<unsigned>(opts.jobs, static_cast<unsigned>(todo.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  EvaluationOutput out;
  out.options = opts.metrics;
  for (auto& s : slots) {
    if (s.metrics) out.cases.push_back(std::move(*s.metrics));
    if (s.error) out.errors.push_back(std::move(*s.error));
    for (auto& t : s.tables) out.match_tables.push_back(std::move(t));
  }
  auto key = [](const auto& x) { return std::tie(x.case_id, x.repeat, x.config); };
  std::sort(out.cases.begin(), out.cases.end(),
            [&](const auto& x, const auto& y) { return key(x) < key(y); });
  std::sort(out.errors.begin(), out.errors.end(),
            [&](const auto& x, const auto& y) { return key(x) < key(y); });
  std::sort(out.match_tables.begin(), out.match_tables.end(), [&](const auto& x, const auto& y) {
    return std::tie(x.case_id, x.repeat, x.config, x.label) <
           std::tie(y.case_id, y.repeat, y.config, y.label);
  });
  return out;
}

void write_metrics_csv(std::ostream& out, const EvaluationOutput& eval) {
  out << "# " << kCsvSchema << '\n' << options_line(eval.options) << '\n';
  out << "case_id,config,fold,repeat,class";
  for (const auto& f : metric_fields()) out << ',' << f.name;
  for (const auto& c : count_columns()) out << ',' << c;
  out << ",status\n";

  // Cases and errors interleaved in (case_id, repeat, config) order.
  std::size_t ci = 0;
  std::size_t ei = 0;
  auto key = [](const auto& x) { return std::tie(x.case_id, x.repeat, x.config); };
  while (ci < eval.cases.size() || ei < eval.errors.size()) {
    const bool take_case = ei == eval.errors.size() ||
                           (ci < eval.cases.size() && key(eval.cases[ci]) < key(eval.errors[ei]));
    if (take_case) {
      const auto& c = eval.cases[ci++];
      for (const auto& m : c.classes) {
        out << c.case_id << ',' << c.config << ',' << c.fold << ',' << c.repeat << ',' << m.label;
        for (const auto& f : metric_fields()) out << ',' << format_number(m.*(f.member));
        for (std::size_t i = 0; i < count_columns().size(); ++i) out << ',' << m.*count_member(i);
        out << ",ok\n";
      }
    } else {
      const auto& e = eval.errors[ei++];
      std::string reason = e.reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      out << e.case_id << ',' << e.config << ',' << e.fold << ',' << e.repeat << ',';
      for (std::size_t i = 0; i <= metric_fields().size() + count_columns().size(); ++i) out << ',';
      out << "error: " << reason << '\n';
    }
  }
}

nlohmann::json metrics_json(const EvaluationOutput& eval) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : eval.cases) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& m : c.classes) {
      nlohmann::json jc = {{"label", m.label}, {"class", class_name(m.label)}};
      for (const auto& f : metric_fields()) jc[f.name] = number_json(m.*(f.member));
      for (std::size_t i = 0; i < count_columns().size(); ++i) {
        jc[count_columns()[i]] = m.*count_member(i);
      }
      classes.push_back(jc);
    }
    cases.push_back({{"case_id", c.case_id},
                     {"config", c.config},
                     {"fold", c.fold},
                     {"repeat", c.repeat},
                     {"classes", classes}});
  }
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : eval.errors) {
    errors.push_back({{"case_id", e.case_id},
                      {"config", e.config},
                      {"fold", e.fold},
                      {"repeat", e.repeat},
                      {"reason", e.reason}});
  }

  // Per-class means over all rows (NaN excluded), a quick summary alongside the cases.
  nlohmann::json summary = nlohmann::json::object();
  std::map<std::int32_t, std::map<std::string, std::vector<double>>> values;
  for (const auto& c : eval.cases) {
    for (const auto& m : c.classes) {
      for (const auto& f : metric_fields()) values[m.label][f.name].push_back(m.*(f.member));
    }
  }
  for (const auto& [label, by_metric] : values) {
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [name, v] : by_metric) s[name] = number_json(nan_mean(v));
    summary[class_name(label)] = s;
  }
  return {{"schema", kCsvSchema},
          {"conventions", conventions_json(eval.options)},
          {"cases", cases},
          {"errors", errors},
          {"summary", summary}};
}

nlohmann::json match_tables_json(const EvaluationOutput& eval) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rec : eval.match_tables) {
    auto lesions = [](const std::vector<LesionRecord>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& l : v) a.push_back({{"id", l.id}, {"volume", l.volume}, {"matched", l.matched}});
      return a;
    };
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : rec.table.overlap_pairs) {
      pairs.push_back({{"gt_id", p.gt_id}, {"pred_id", p.pred_id}, {"intersection", p.intersection}});
    }
    out.push_back({{"case_id", rec.case_id},
                   {"config", rec.config},
                   {"repeat", rec.repeat},
                   {"class", class_name(rec.label)},
                   {"gt_lesions", lesions(rec.table.gt_lesions)},
                   {"pred_lesions", lesions(rec.table.pred_lesions)},
                   {"overlap_pairs", pairs}});
  }
  return out;
}

MetricsTable read_metrics_csv(std::istream& in) {
  MetricsTable t;
  std::string line;
  if (!std::getline(in, line) || trim(line) != std::string("# ") + kCsvSchema) {
    throw FormatError(std::string("metrics CSV must start with '# ") + kCsvSchema + "'");
  }
  bool header_seen = false;
  std::vector<std::string> columns;
  std::map<std::tuple<std::string, int, std::string>, std::size_t> index;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto k = kv.substr(0, eq);
        const auto v = kv.substr(eq + 1);
        if (k == "connectivity") t.options.connectivity = parse_connectivity(v);
        if (k == "tolerance_mm") t.options.tolerance_mm = parse_number(v);
        if (k == "numerator_constant") t.options.numerator_constant = parse_number(v);
      }
      continue;
    }
    if (!header_seen) {
      columns = split(line, ',');
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != columns.size()) throw FormatError("metrics CSV row has wrong field count");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < f.size(); ++i) row[columns[i]] = f[i];
    if (row["status"] != "ok") continue;

    const auto key = std::make_tuple(row["case_id"], parse_int(row["repeat"], "repeat"), row["config"]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, t.cases.size()).first;
      t.cases.push_back({row["case_id"], row["config"], parse_int(row["fold"], "fold"),
                         std::get<1>(key), {}});
    }
    ClassMetrics m;
    m.label = parse_int(row["class"], "class");
    for (const auto& fld : metric_fields()) m.*(fld.member) = parse_number(row.at(fld.name));
    for (std::size_t i = 0; i < count_columns().size(); ++i) {
      m.*count_member(i) = std::stoll(row.at(count_columns()[i]));
    }
    t.cases[it->second].classes.push_back(m);
  }
  if (!header_seen) throw FormatError("metrics CSV has no header row");
  return t;
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_metrics_csv(in);
}

ComparisonReport compare(const MetricsTable& a, const MetricsTable& b, const std::string& name_a,
                         const std::string& name_b) {
  if (a.options.connectivity != b.options.connectivity ||
      a.options.tolerance_mm != b.options.tolerance_mm ||
      a.options.numerator_constant != b.options.numerator_constant) {
    throw ValidationError("metric tables were produced with different evaluation options");
  }
  const auto agg_a = aggregate_runs(a.cases);
  const auto agg_b = aggregate_runs(b.cases);

  std::vector<std::string> only_a;
  std::vector<std::string> only_b;
  for (const auto& [id, fold] : agg_a.fold_of_case) {
    if (!agg_b.fold_of_case.contains(id)) only_a.push_back(id);
  }
  for (const auto& [id, fold] : agg_b.fold_of_case) {
    if (!agg_a.fold_of_case.contains(id)) only_b.push_back(id);
  }
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "case sets differ;";
    auto list = [&](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" missing from ") + label + ":";
      for (const auto& id : ids) msg += " " + id;
      msg += ";";
    };
    list(name_b.c_str(), only_a);
    list(name_a.c_str(), only_b);
    throw ValidationError(msg);
  }
  for (const auto& [id, fold] : agg_a.fold_of_case) {
    if (agg_b.fold_of_case.at(id) != fold) {
      throw ValidationError("inconsistent fold assignment for case '" + id + "' across configurations");
    }
  }

  ComparisonReport report;
  report.name_a = name_a;
  report.name_b = name_b;
  report.options = a.options;
  report.patients = agg_a.fold_of_case.size();

  std::set<std::int32_t> labels;
  for (const auto& [key, s] : agg_a.series) labels.insert(key.first);
  for (const auto& [key, s] : agg_b.series) labels.insert(key.first);

  for (const auto& f : metric_fields()) {
    for (auto label : labels) {
      const MetricKey key{label, f.name};
      const auto ia = agg_a.series.find(key);
      const auto ib = agg_b.series.find(key);
      if (ia == agg_a.series.end() || ib == agg_b.series.end()) {
        throw ValidationError("class " + class_name(label) + " is missing from one table");
      }
      ComparisonRow row;
      row.label = label;
      row.metric = f.name;
      row.mean_a = ia->second.mean;
      row.mean_b = ib->second.mean;

      PairedSample sample;
      for (const auto& [id, va] : ia->second.per_patient) {
        const auto jb = ib->second.per_patient.find(id);
        sample.ids.push_back(id);
        sample.a.push_back(va);
        sample.b.push_back(jb == ib->second.per_patient.end() ? kNaN : jb->second);
      }
      try {
        const auto w = wilcoxon_signed_rank(sample);
        row.p_value = w.p_value;
        row.n_effective = w.n_effective;
        row.exact = w.exact;
      } catch (const DegenerateSample&) {
        row.p_value = kNaN;
      }
      row.significant = !std::isnan(row.p_value) && is_significant(row.p_value);
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string metric_display_name(const std::string& metric) {
  static const std::map<std::string, std::string> names = {
      {"dice", "Dice"},
      {"adaptive_dice", "Adaptive Dice"},
      {"adaptive_dice_normalized", "Adaptive Dice (normalized)"},
      {"lesionwise_dice", "Lesion-Wise Dice"},
      {"sds", "SDS"},
      {"msd", "MSD (mm)"},
      {"hd95", "HD95 (mm)"},
      {"sensitivity", "Lesion-Wise Binary Sensitivity"},
      {"precision", "Lesion-Wise Binary Precision"},
  };
  const auto it = names.find(metric);
  return it == names.end() ? metric : it->second;
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"class", class_name(r.label)},
                    {"label", r.label},
                    {"metric", r.metric},
                    {"mean_a", number_json(r.mean_a)},
                    {"mean_b", number_json(r.mean_b)},
                    {"p_value", std::isnan(r.p_value) ? nlohmann::json("—") : number_json(r.p_value)},
                    {"n_effective", r.n_effective},
                    {"exact", r.exact},
                    {"significant", r.significant}});
  }
  return {{"schema", kCsvSchema},
          {"name_a", report.name_a},
          {"name_b", report.name_b},
          {"patients", report.patients},
          {"significance_level", kSignificanceLevel},
          {"conventions", conventions_json(report.options)},
          {"rows", rows}};
}

std::string render_text(const ComparisonReport& report) {
  auto fixed3 = [](double v) {
    if (!std::isfinite(v)) return format_number(v);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << report.name_a << " vs " << report.name_b << " (" << report.patients << " patients)\n";
  out << "connectivity " << neighbor_count(report.options.connectivity) << ", SDS tolerance "
      << format_number(report.options.tolerance_mm)
      << " mm, HD95 = max of directed 95th percentiles, two-sided Wilcoxon signed-rank"
      << " (zero differences dropped), * p < " << kSignificanceLevel << "\n";
  for (const auto& r : report.rows) {
    out << class_name(r.label) << ' ' << metric_display_name(r.metric) << ' ' << fixed3(r.mean_a)
        << " vs " << fixed3(r.mean_b) << ", p = "
        << (std::isnan(r.p_value) ? std::string("—") : fixed3(r.p_value))
        << (r.significant ? " *" : "") << '\n';
  }
  return out.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace lesionmetrics

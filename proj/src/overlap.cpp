#include "lesionmetrics/overlap.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "lesionmetrics/surface.hpp"

namespace lesionmetrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct WeightedSums {
  double weighted_overlap = 0.0;  // Σ w g pred
  double weighted_gt = 0.0;       // Σ w g
  double pred = 0.0;              // Σ pred
  double gt = 0.0;                // Σ g
};

WeightedSums weighted_sums(const BinaryMask& gt, const BinaryMask& pred, Connectivity conn) {
  require_same_grid(gt, pred);
  const auto w = weight_map(label_components(gt, conn));
  WeightedSums s;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    s.weighted_overlap += w.w[i] * static_cast<double>(pred[i]);
    s.weighted_gt += w.w[i];
    s.pred += pred[i];
    s.gt += gt[i];
  }
  return s;
}

}  // namespace

double volumetric_dice(const BinaryMask& gt, const BinaryMask& pred) {
  require_same_grid(gt, pred);
  std::size_t inter = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    a += gt[i];
    b += pred[i];
    inter += gt[i] & pred[i];
  }
  if (a + b == 0) return kNaN;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

double adaptive_dice(const BinaryMask& gt, const BinaryMask& pred, Connectivity conn,
                     double numerator_constant) {
  const auto s = weighted_sums(gt, pred, conn);
  if (s.gt == 0.0 && s.pred == 0.0) return kNaN;
  return numerator_constant * s.weighted_overlap / (s.pred + s.weighted_gt);
}

double adaptive_dice_normalized(const BinaryMask& gt, const BinaryMask& pred, Connectivity conn,
                                double numerator_constant) {
  const auto s = weighted_sums(gt, pred, conn);
  if (s.gt == 0.0 && s.pred == 0.0) return kNaN;
  if (s.gt == 0.0) return 0.0;
  const double raw = numerator_constant * s.weighted_overlap / (s.pred + s.weighted_gt);
  const double perfect = numerator_constant * s.weighted_gt / (s.gt + s.weighted_gt);
  return raw / perfect;
}

LesionMatchTable match_lesions(const ComponentMap& gt, const ComponentMap& pred) {
  if (!(gt.dims == pred.dims)) {
    throw DimensionMismatch("dimension mismatch: " + to_string(gt.dims) + " vs " +
                            to_string(pred.dims));
  }
  LesionMatchTable t;
  for (std::size_t j = 0; j < gt.count(); ++j) {
    t.gt_lesions.push_back({static_cast<std::int32_t>(j + 1), gt.volumes[j], false});
  }
  for (std::size_t j = 0; j < pred.count(); ++j) {
    t.pred_lesions.push_back({static_cast<std::int32_t>(j + 1), pred.volumes[j], false});
  }
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> pairs;
  for (std::size_t i = 0; i < gt.ids.size(); ++i) {
    if (gt.ids[i] != 0 && pred.ids[i] != 0) ++pairs[{gt.ids[i], pred.ids[i]}];
  }
  for (const auto& [key, count] : pairs) {
    t.overlap_pairs.push_back({key.first, key.second, count});
    t.gt_lesions[static_cast<std::size_t>(key.first - 1)].matched = true;
    t.pred_lesions[static_cast<std::size_t>(key.second - 1)].matched = true;
  }
  return t;
}

double lesionwise_dice(const BinaryMask& gt, const BinaryMask& pred, Connectivity conn) {
  require_same_grid(gt, pred);
  const auto gc = label_components(gt, conn);
  const auto pc = label_components(pred, conn);
  const auto table = match_lesions(gc, pc);

  // |comp_j ∩ P_j| is the sum of pair intersections; |P_j| the sum of matched pred volumes.
  std::vector<std::int64_t> inter(gc.count(), 0);
  std::vector<std::int64_t> union_pred(gc.count(), 0);
  for (const auto& p : table.overlap_pairs) {
    const auto j = static_cast<std::size_t>(p.gt_id - 1);
    inter[j] += p.intersection;
    union_pred[j] += pc.volume(p.pred_id);
  }
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t j = 0; j < gc.count(); ++j) {
    total += 2.0 * static_cast<double>(inter[j]) /
             static_cast<double>(gc.volumes[j] + union_pred[j]);
    ++terms;
  }
  for (const auto& l : table.pred_lesions) {
    if (!l.matched) ++terms;  // scores 0
  }
  if (terms == 0) return kNaN;
  return total / static_cast<double>(terms);
}

DetectionResult detection_metrics(const BinaryMask& gt, const BinaryMask& pred,
                                  Connectivity conn) {
  require_same_grid(gt, pred);
  DetectionResult r;
  r.table = match_lesions(label_components(gt, conn), label_components(pred, conn));
  for (const auto& l : r.table.gt_lesions) (l.matched ? r.true_positive_gt : r.false_negative)++;
  for (const auto& l : r.table.pred_lesions) {
    (l.matched ? r.true_positive_pred : r.false_positive)++;
  }
  const auto n_gt = static_cast<double>(r.table.gt_lesions.size());
  const auto n_pred = static_cast<double>(r.table.pred_lesions.size());
  r.sensitivity = n_gt > 0 ? static_cast<double>(r.true_positive_gt) / n_gt : kNaN;
  r.precision = n_pred > 0 ? static_cast<double>(r.true_positive_pred) / n_pred : kNaN;
  return r;
}

ClassMetrics evaluate_class(const BinaryMask& gt, const BinaryMask& pred, std::int32_t label,
                            const EvalOptions& opts) {
  require_same_grid(gt, pred, true);
  ClassMetrics m;
  m.label = label;
  m.dice = volumetric_dice(gt, pred);
  m.adaptive_dice = adaptive_dice(gt, pred, opts.connectivity, opts.numerator_constant);
  m.adaptive_dice_normalized =
      adaptive_dice_normalized(gt, pred, opts.connectivity, opts.numerator_constant);
  m.lesionwise_dice = lesionwise_dice(gt, pred, opts.connectivity);

  if (gt.empty() && pred.empty()) {
    m.sds = m.msd = m.hd95 = kNaN;
  } else {
    const auto d = surface_distances(gt, pred);
    m.sds = surface_dice(d, opts.tolerance_mm);
    m.msd = mean_surface_distance(d);
    m.hd95 = hd95(d);
  }

  const auto det = detection_metrics(gt, pred, opts.connectivity);
  m.sensitivity = det.sensitivity;
  m.precision = det.precision;
  m.gt_lesions = static_cast<std::int64_t>(det.table.gt_lesions.size());
  m.pred_lesions = static_cast<std::int64_t>(det.table.pred_lesions.size());
  m.tp_gt = det.true_positive_gt;
  m.fn = det.false_negative;
  m.tp_pred = det.true_positive_pred;
  m.fp = det.false_positive;
  return m;
}

std::vector<ClassMetrics> evaluate_labels(const LabelVolume& gt, const LabelVolume& pred,
                                          const EvalOptions& opts) {
  require_same_grid(gt, pred, true);
  std::vector<ClassMetrics> out;
  for (auto label : gt.labels()) {
    const auto pred_mask =
        pred.declares(label) ? extract_class(pred, label) : BinaryMask(pred.dims(), pred.spacing());
    out.push_back(evaluate_class(extract_class(gt, label), pred_mask, label, opts));
  }
  return out;
}

}  // namespace lesionmetrics

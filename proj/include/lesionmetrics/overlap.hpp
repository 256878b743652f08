#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesionmetrics/components.hpp"
#include "lesionmetrics/volume.hpp"

namespace lesionmetrics {

/// 2|gt ∩ pred| / (|gt| + |pred|); NaN when both are empty.
double volumetric_dice(const BinaryMask& gt, const BinaryMask& pred);

/// Binarized, ε-free volume-aware ratio C Σ w g pred / (Σ pred + Σ w g), with w = 1/√V
/// from the ground-truth components. NaN when both are empty.
double adaptive_dice(const BinaryMask& gt, const BinaryMask& pred,
                     Connectivity conn = Connectivity::Corner26, double numerator_constant = 2.0);

/// adaptive_dice divided by its value for a perfect prediction of the same ground truth,
/// so that a perfect prediction scores 1 regardless of lesion sizes. 0 when gt is empty
/// and pred is not; NaN when both are empty.
double adaptive_dice_normalized(const BinaryMask& gt, const BinaryMask& pred,
                                Connectivity conn = Connectivity::Corner26,
                                double numerator_constant = 2.0);

/// Mean per-lesion Dice. Each ground-truth lesion is scored against the union of the
/// predicted lesions overlapping it; predicted lesions overlapping nothing score 0.
double lesionwise_dice(const BinaryMask& gt, const BinaryMask& pred,
                       Connectivity conn = Connectivity::Corner26);

struct LesionRecord {
  std::int32_t id = 0;
  std::int64_t volume = 0;
  bool matched = false;
};

struct OverlapPair {
  std::int32_t gt_id = 0;
  std::int32_t pred_id = 0;
  std::int64_t intersection = 0;
};

/// Any-overlap matching between ground-truth and predicted components.
struct LesionMatchTable {
  std::vector<LesionRecord> gt_lesions;
  std::vector<LesionRecord> pred_lesions;
  /// Sorted by (gt_id, pred_id).
  std::vector<OverlapPair> overlap_pairs;
};

LesionMatchTable match_lesions(const ComponentMap& gt, const ComponentMap& pred);

struct DetectionResult {
  /// matched gt lesions / gt lesions; NaN with no gt lesions.
  double sensitivity = 0.0;
  /// matched predicted lesions / predicted lesions; NaN with no predicted lesions.
  double precision = 0.0;
  std::int64_t true_positive_gt = 0;
  std::int64_t false_negative = 0;
  std::int64_t true_positive_pred = 0;
  std::int64_t false_positive = 0;
  LesionMatchTable table;
};

/// A lesion counts as detected when it shares at least one voxel with the other side.
DetectionResult detection_metrics(const BinaryMask& gt, const BinaryMask& pred,
                                  Connectivity conn = Connectivity::Corner26);

/// Every per-class metric of one case.
struct ClassMetrics {
  std::int32_t label = 0;
  double dice = 0.0;
  double adaptive_dice = 0.0;
  double adaptive_dice_normalized = 0.0;
  double lesionwise_dice = 0.0;
  double sds = 0.0;
  double msd = 0.0;
  double hd95 = 0.0;
  double sensitivity = 0.0;
  double precision = 0.0;
  std::int64_t gt_lesions = 0;
  std::int64_t pred_lesions = 0;
  std::int64_t tp_gt = 0;
  std::int64_t fn = 0;
  std::int64_t tp_pred = 0;
  std::int64_t fp = 0;
};

struct CaseMetrics {
  std::string case_id;
  std::string config;
  int fold = 0;
  int repeat = 0;
  std::vector<ClassMetrics> classes;
};

struct EvalOptions {
  Connectivity connectivity = Connectivity::Corner26;
  double tolerance_mm = 1.0;
  double numerator_constant = 2.0;
};

/// All metrics for one structure. Surface metrics are NaN when both masks are empty.
ClassMetrics evaluate_class(const BinaryMask& gt, const BinaryMask& pred, std::int32_t label,
                            const EvalOptions& opts = {});

/// Per-class metrics for every label declared by the ground truth.
std::vector<ClassMetrics> evaluate_labels(const LabelVolume& gt, const LabelVolume& pred,
                                          const EvalOptions& opts = {});

}  // namespace lesionmetrics

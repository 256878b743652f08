#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lesionmetrics/components.hpp"
#include "lesionmetrics/volume.hpp"

namespace lesionmetrics {

/// Loss value and its gradient with respect to every prediction voxel.
struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;
};

enum class ClassLossMode { StandardDice, VolumeAware };

std::string to_string(ClassLossMode m);

struct LossConfig {
  double epsilon = 1e-5;
  /// Numerator scale of the volume-aware ratio.
  double numerator_constant = 2.0;
  std::map<std::int32_t, ClassLossMode> per_class_mode;
  bool include_cross_entropy = false;
  Connectivity connectivity = Connectivity::Corner26;
  VolumeUnit volume_unit = VolumeUnit::Voxels;

  /// Throws RangeError for non-positive epsilon or constant.
  void validate() const;

  /// Standard Dice on both structures plus cross-entropy.
  static LossConfig baseline();
  /// Volume-aware Dice on both PT and LN.
  static LossConfig dual_mask();
  /// Standard Dice on PT, volume-aware Dice on LN.
  static LossConfig selective_ln();
  /// "baseline", "dual" / "dual_mask", "selective" / "selective_ln".
  static LossConfig preset(const std::string& name);
};

// Span-level kernels. g is 0/1, p and w are per voxel. epsilon may be 0 here.

/// 1 - (2 Σ p g + ε) / (Σ p² + Σ g² + ε)
LossResult soft_dice_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                          double epsilon);

/// Numerator N = C Σ w g p + ε and denominator D = Σ p² + Σ w g + ε of the
/// volume-aware ratio.
struct VolumeAwareTerms {
  double numerator = 0.0;
  double denominator = 0.0;
};

VolumeAwareTerms va_dice_terms(std::span<const double> p, std::span<const std::uint8_t> g,
                               std::span<const double> w, double numerator_constant,
                               double epsilon);

/// -N / D. ∂L/∂p_k = -C w_k g_k / D + 2 N p_k / D².
LossResult va_dice_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                        std::span<const double> w, double numerator_constant, double epsilon);

/// -mean[g ln(p + ε) + (1 - g) ln(1 - p + ε)]
LossResult cross_entropy_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                              double epsilon);

// Volume-level API.

LossResult soft_dice_loss(const ProbVolume& p, const BinaryMask& g, double epsilon = 1e-5);

/// Weights are derived from the components of g. A cache, when given, is consulted first.
LossResult va_dice_loss(const ProbVolume& p, const BinaryMask& g, const LossConfig& cfg,
                        WeightMapCache* cache = nullptr);

LossResult cross_entropy_loss(const ProbVolume& p, const BinaryMask& g, double epsilon = 1e-5);

struct ConfiguredLossResult {
  /// mean over classes of the Dice-family loss, plus mean cross-entropy when enabled.
  double value = 0.0;
  std::map<std::int32_t, LossResult> dice;
  std::map<std::int32_t, LossResult> cross_entropy;
  /// ∂value/∂p for each class channel.
  std::map<std::int32_t, std::vector<double>> gradient;
};

/// Applies the per-class loss of `cfg` to every foreground class declared by `g`.
/// Throws RangeError when a class channel is missing from `p_per_class` or from the config.
ConfiguredLossResult configured_loss(const std::map<std::int32_t, ProbVolume>& p_per_class,
                                     const LabelVolume& g, const LossConfig& cfg,
                                     WeightMapCache* cache = nullptr);

}  // namespace lesionmetrics

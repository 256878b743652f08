#include "lesionmetrics/loss.hpp"

#include <cmath>

namespace lesionmetrics {

std::string to_string(ClassLossMode m) {
  return m == ClassLossMode::VolumeAware ? "volume-aware" : "standard-dice";
}

void LossConfig::validate() const {
  if (!(epsilon > 0.0)) throw RangeError("epsilon must be positive");
  if (!(numerator_constant > 0.0)) throw RangeError("numerator constant C must be positive");
}

LossConfig LossConfig::baseline() {
  LossConfig cfg;
  cfg.per_class_mode = {{LabelVolume::kPrimaryTumor, ClassLossMode::StandardDice},
                        {LabelVolume::kLymphNode, ClassLossMode::StandardDice}};
  cfg.include_cross_entropy = true;
  return cfg;
}

LossConfig LossConfig::dual_mask() {
  LossConfig cfg;
  cfg.per_class_mode = {{LabelVolume::kPrimaryTumor, ClassLossMode::VolumeAware},
                        {LabelVolume::kLymphNode, ClassLossMode::VolumeAware}};
  return cfg;
}

LossConfig LossConfig::selective_ln() {
  LossConfig cfg;
  cfg.per_class_mode = {{LabelVolume::kPrimaryTumor, ClassLossMode::StandardDice},
                        {LabelVolume::kLymphNode, ClassLossMode::VolumeAware}};
  return cfg;
}

LossConfig LossConfig::preset(const std::string& name) {
  if (name == "baseline") return baseline();
  if (name == "dual" || name == "dual_mask") return dual_mask();
  if (name == "selective" || name == "selective_ln") return selective_ln();
  throw RangeError("unknown loss preset '" + name + "'");
}

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionMismatch("array lengths differ: " + std::to_string(a) + " vs " +
                            std::to_string(b));
  }
}

}  // namespace

LossResult soft_dice_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                          double epsilon) {
  require_same_length(p.size(), g.size());
  double inter = 0.0;
  double p_sq = 0.0;
  double g_sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] ? 1.0 : 0.0;
    inter += p[i] * gi;
    p_sq += p[i] * p[i];
    g_sq += gi;
  }
  const double num = 2.0 * inter + epsilon;
  const double den = p_sq + g_sq + epsilon;

  LossResult r;
  r.value = 1.0 - num / den;
  r.gradient.resize(p.size());
  const double den_sq = den * den;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] ? 1.0 : 0.0;
    r.gradient[i] = -2.0 * gi / den + 2.0 * num * p[i] / den_sq;
  }
  return r;
}

VolumeAwareTerms va_dice_terms(std::span<const double> p, std::span<const std::uint8_t> g,
                               std::span<const double> w, double numerator_constant,
                               double epsilon) {
  require_same_length(p.size(), g.size());
  require_same_length(p.size(), w.size());
  double weighted_inter = 0.0;
  double p_sq = 0.0;
  double weighted_g = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double wg = g[i] ? w[i] : 0.0;
    weighted_inter += wg * p[i];
    p_sq += p[i] * p[i];
    weighted_g += wg;  // g binary, so g W g = Σ w g
  }
  return {numerator_constant * weighted_inter + epsilon, p_sq + weighted_g + epsilon};
}

LossResult va_dice_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                        std::span<const double> w, double numerator_constant, double epsilon) {
  const auto [num, den] = va_dice_terms(p, g, w, numerator_constant, epsilon);
  LossResult r;
  r.value = -num / den;
  r.gradient.resize(p.size());
  const double den_sq = den * den;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double wg = g[i] ? w[i] : 0.0;
    r.gradient[i] = -numerator_constant * wg / den + 2.0 * num * p[i] / den_sq;
  }
  return r;
}

LossResult cross_entropy_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                              double epsilon) {
  require_same_length(p.size(), g.size());
  LossResult r;
  r.gradient.resize(p.size());
  if (p.empty()) return r;
  const double n = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]) {
      sum += std::log(p[i] + epsilon);
      r.gradient[i] = -1.0 / ((p[i] + epsilon) * n);
    } else {
      sum += std::log(1.0 - p[i] + epsilon);
      r.gradient[i] = 1.0 / ((1.0 - p[i] + epsilon) * n);
    }
  }
  r.value = -sum / n;
  return r;
}

LossResult soft_dice_loss(const ProbVolume& p, const BinaryMask& g, double epsilon) {
  require_same_grid(p, g);
  return soft_dice_loss(p.data(), g.data(), epsilon);
}

LossResult va_dice_loss(const ProbVolume& p, const BinaryMask& g, const LossConfig& cfg,
                        WeightMapCache* cache) {
  cfg.validate();
  require_same_grid(p, g);
  if (cache != nullptr) {
    const auto w = cache->get(g, cfg.connectivity, cfg.volume_unit);
    return va_dice_loss(p.data(), g.data(), w->w, cfg.numerator_constant, cfg.epsilon);
  }
  const auto w = weight_map(label_components(g, cfg.connectivity), cfg.volume_unit);
  return va_dice_loss(p.data(), g.data(), w.w, cfg.numerator_constant, cfg.epsilon);
}

LossResult cross_entropy_loss(const ProbVolume& p, const BinaryMask& g, double epsilon) {
  require_same_grid(p, g);
  return cross_entropy_loss(p.data(), g.data(), epsilon);
}

ConfiguredLossResult configured_loss(const std::map<std::int32_t, ProbVolume>& p_per_class,
                                     const LabelVolume& g, const LossConfig& cfg,
                                     WeightMapCache* cache) {
  cfg.validate();
  const auto& classes = g.labels();
  if (classes.empty()) throw RangeError("label volume declares no foreground class");

  ConfiguredLossResult out;
  const double k = static_cast<double>(classes.size());
  for (auto c : classes) {
    const auto pit = p_per_class.find(c);
    if (pit == p_per_class.end()) {
      throw RangeError("missing prediction channel for class " + std::to_string(c));
    }
    const auto mit = cfg.per_class_mode.find(c);
    if (mit == cfg.per_class_mode.end()) {
      throw RangeError("loss configuration has no mode for class " + std::to_string(c));
    }
    const ProbVolume& p = pit->second;
    const BinaryMask mask = extract_class(g, c);
    require_same_grid(p, mask);

    LossResult dice = mit->second == ClassLossMode::VolumeAware
                          ? va_dice_loss(p, mask, cfg, cache)
                          : soft_dice_loss(p, mask, cfg.epsilon);
    std::vector<double> grad(dice.gradient.size());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = dice.gradient[i] / k;
    out.value += dice.value / k;

    if (cfg.include_cross_entropy) {
      LossResult ce = cross_entropy_loss(p, mask, cfg.epsilon);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += ce.gradient[i] / k;
      out.value += ce.value / k;
      out.cross_entropy.emplace(c, std::move(ce));
    }
    out.dice.emplace(c, std::move(dice));
    out.gradient.emplace(c, std::move(grad));
  }
  return out;
}

}  // namespace lesionmetrics

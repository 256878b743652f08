#include "lesionmetrics/phantom.hpp"

#include <cmath>

namespace lesionmetrics {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform [0, 1) draw keyed by (seed, voxel, label), independent of every other lesion.
double voxel_uniform(std::uint64_t seed, std::size_t voxel, std::int32_t label) {
  const std::uint64_t h =
      splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(voxel) * 8 +
                                   static_cast<std::uint64_t>(label)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::array<std::int64_t, 3> reach_voxels(const PhantomLesion& l, const Spacing& sp) {
  const auto s = sp.as_array();
  std::array<std::int64_t, 3> r{};
  for (std::size_t a = 0; a < 3; ++a) {
    r[a] = static_cast<std::int64_t>(std::floor(l.radius_mm / s[a] + 1e-9));
  }
  return r;
}

bool inside(const PhantomLesion& l, const Spacing& sp, std::int64_t i, std::int64_t j,
            std::int64_t k) {
  const double x = static_cast<double>(i - l.center[0]) * sp.dx;
  const double y = static_cast<double>(j - l.center[1]) * sp.dy;
  const double z = static_cast<double>(k - l.center[2]) * sp.dz;
  return x * x + y * y + z * z <= l.radius_mm * l.radius_mm * (1.0 + 1e-12);
}

// Paints lesions into a label grid; returns label conflicts between distinct labels.
std::vector<std::string> paint(const PhantomSpec& spec, bool predicted_only,
                               std::vector<std::int32_t>& labels) {
  std::vector<std::string> warnings;
  const Dims& d = spec.dims;
  labels.assign(d.size(), 0);
  for (std::size_t n = 0; n < spec.lesions.size(); ++n) {
    const auto& l = spec.lesions[n];
    if (predicted_only && !l.predicted) continue;
    const auto r = reach_voxels(l, spec.spacing);
    bool conflict = false;
    for (auto i = l.center[0] - r[0]; i <= l.center[0] + r[0]; ++i) {
      for (auto j = l.center[1] - r[1]; j <= l.center[1] + r[1]; ++j) {
        for (auto k = l.center[2] - r[2]; k <= l.center[2] + r[2]; ++k) {
          if (!inside(l, spec.spacing, i, j, k)) continue;
          auto& v = labels[d.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                   static_cast<std::size_t>(k))];
          conflict = conflict || (v != 0 && v != l.label);
          v = l.label;
        }
      }
    }
    if (conflict) {
      warnings.push_back("lesion " + std::to_string(n) + " (label " + std::to_string(l.label) +
                         ") overlaps a lesion of a different label");
    }
  }
  return warnings;
}

}  // namespace

void PhantomSpec::validate() const {
  if (dims.size() == 0) throw RangeError("phantom dims must be positive");
  spacing.validate();
  if (!(noise >= 0.0 && noise < 1.0)) throw RangeError("phantom noise must lie in [0, 1)");
  const auto n = dims.as_array();
  for (std::size_t idx = 0; idx < lesions.size(); ++idx) {
    const auto& l = lesions[idx];
    if (l.label != LabelVolume::kPrimaryTumor && l.label != LabelVolume::kLymphNode) {
      throw RangeError("phantom lesion labels must be 1 or 2");
    }
    if (!(l.radius_mm >= 0.0) || !std::isfinite(l.radius_mm)) {
      throw RangeError("phantom lesion radius must be non-negative");
    }
    const auto r = reach_voxels(l, spacing);
    for (std::size_t a = 0; a < 3; ++a) {
      if (l.center[a] - r[a] < 0 || l.center[a] + r[a] >= static_cast<std::int64_t>(n[a])) {
        throw RangeError("lesion " + std::to_string(idx) + " does not fit inside the grid");
      }
    }
  }
}

Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  const Dims& d = spec.dims;

  std::vector<std::int32_t> gt;
  auto warnings = paint(spec, false, gt);
  std::vector<std::int32_t> pred;
  paint(spec, true, pred);

  Phantom out;
  out.warnings = std::move(warnings);
  out.ground_truth = LabelVolume(d, spec.spacing, gt);

  std::map<std::int32_t, std::vector<double>> prob;
  for (auto label : LabelVolume::default_labels()) {
    auto& p = prob[label];
    p.assign(d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) p[i] = pred[i] == label ? 1.0 : 0.0;
  }

  // Surface voxels: a face neighbour with another label or outside the grid.
  std::vector<std::int32_t> perturbed = pred;
  if (spec.noise > 0.0) {
    const std::array<long, 3> n{static_cast<long>(d.nx), static_cast<long>(d.ny),
                                static_cast<long>(d.nz)};
    for (std::size_t idx = 0; idx < d.size(); ++idx) {
      const std::int32_t label = pred[idx];
      if (label == 0) continue;
      const auto c = d.coords(idx);
      bool surface = false;
      for (std::size_t axis = 0; axis < 3 && !surface; ++axis) {
        for (int side : {-1, 1}) {
          std::array<long, 3> nb{static_cast<long>(c[0]), static_cast<long>(c[1]),
                                 static_cast<long>(c[2])};
          nb[axis] += side;
          if (nb[axis] < 0 || nb[axis] >= n[axis] ||
              pred[d.index(nb[0], nb[1], nb[2])] != label) {
            surface = true;
            break;
          }
        }
      }
      if (surface && voxel_uniform(spec.seed, idx, label) < spec.noise) {
        prob[label][idx] = 0.5;
        perturbed[idx] = 0;
      }
    }
  }
  out.prediction = LabelVolume(d, spec.spacing, std::move(perturbed));
  for (auto& [label, p] : prob) out.probabilities.emplace(label, ProbVolume(d, spec.spacing, std::move(p)));
  return out;
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  PhantomSpec spec;
  try {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw RangeError("phantom dims need three entries");
    spec.dims = {dims[0], dims[1], dims[2]};
    if (j.contains("spacing")) {
      const auto sp = j.at("spacing").get<std::vector<double>>();
      if (sp.size() != 3) throw RangeError("phantom spacing needs three entries");
      spec.spacing = {sp[0], sp[1], sp[2]};
    }
    spec.noise = j.value("noise", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& lj : j.value("lesions", nlohmann::json::array())) {
      PhantomLesion l;
      const auto c = lj.at("center").get<std::vector<std::int64_t>>();
      if (c.size() != 3) throw RangeError("lesion center needs three entries");
      l.center = {c[0], c[1], c[2]};
      l.radius_mm = lj.at("radius_mm").get<double>();
      l.label = lj.value("label", LabelVolume::kLymphNode);
      l.predicted = lj.value("predicted", true);
      spec.lesions.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed phantom spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const PhantomSpec& spec) {
  nlohmann::json lesions = nlohmann::json::array();
  for (const auto& l : spec.lesions) {
    lesions.push_back({{"center", l.center},
                       {"radius_mm", l.radius_mm},
                       {"label", l.label},
                       {"predicted", l.predicted}});
  }
  return {{"dims", {spec.dims.nx, spec.dims.ny, spec.dims.nz}},
          {"spacing", {spec.spacing.dx, spec.spacing.dy, spec.spacing.dz}},
          {"noise", spec.noise},
          {"seed", spec.seed},
          {"lesions", lesions}};
}

}  // namespace lesionmetrics

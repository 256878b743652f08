#include "lesionmetrics/volume.hpp"

#include <algorithm>
#include <cmath>

namespace lesionmetrics {

void Spacing::validate() const {
  for (double s : as_array()) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw RangeError("spacing components must be positive, got (" + std::to_string(dx) +
                       ", " + std::to_string(dy) + ", " + std::to_string(dz) + ")");
    }
  }
}

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

BinaryMask::BinaryMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> data)
    : Grid(dims, spacing, std::move(data)) {
  for (auto& v : data_) v = v != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

LabelVolume::LabelVolume(Dims dims, Spacing spacing, std::vector<std::int32_t> data,
                         std::vector<std::int32_t> labels)
    : Grid(dims, spacing, std::move(data)), labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  for (auto l : labels_) {
    if (l <= 0) throw RangeError("declared labels must be positive, got " + std::to_string(l));
  }
  for (auto v : data_) {
    if (v != 0 && !declares(v)) throw RangeError("unexpected label " + std::to_string(v));
  }
}

bool LabelVolume::declares(std::int32_t label) const {
  return std::binary_search(labels_.begin(), labels_.end(), label);
}

ProbVolume::ProbVolume(Dims dims, Spacing spacing, std::vector<double> data)
    : Grid(dims, spacing, std::move(data)) {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw RangeError("probability out of range [0,1] at voxel " + std::to_string(i) + ": " +
                       std::to_string(v));
    }
  }
}

BinaryMask extract_class(const LabelVolume& vol, std::int32_t label) {
  if (!vol.declares(label)) {
    throw RangeError("label " + std::to_string(label) + " is not declared by the volume");
  }
  std::vector<std::uint8_t> out(vol.size());
  auto src = vol.data();
  std::transform(src.begin(), src.end(), out.begin(),
                 [label](std::int32_t v) { return static_cast<std::uint8_t>(v == label); });
  return {vol.dims(), vol.spacing(), std::move(out)};
}

ProbVolume to_prob(const BinaryMask& mask) {
  std::vector<double> p(mask.data().begin(), mask.data().end());
  return {mask.dims(), mask.spacing(), std::move(p)};
}

}  // namespace lesionmetrics

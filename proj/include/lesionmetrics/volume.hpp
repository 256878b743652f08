#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesionmetrics/error.hpp"

namespace lesionmetrics {

/// Voxel edge lengths in millimetres.
struct Spacing {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  [[nodiscard]] double voxel_volume() const { return dx * dy * dz; }
  [[nodiscard]] std::array<double, 3> as_array() const { return {dx, dy, dz}; }
  /// Throws RangeError unless all three components are strictly positive and finite.
  void validate() const;

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Grid extents. Voxel (i, j, k) lives at linear index (i * ny + j) * nz + k,
/// i.e. C order over (x, y, z), the layout of a numpy array of shape (nx, ny, nz).
struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  [[nodiscard]] std::size_t size() const { return nx * ny * nz; }
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * ny + j) * nz + k;
  }
  [[nodiscard]] std::array<std::size_t, 3> coords(std::size_t linear) const {
    return {linear / (ny * nz), (linear / nz) % ny, linear % nz};
  }
  [[nodiscard]] std::array<std::size_t, 3> as_array() const { return {nx, ny, nz}; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Dense voxel grid with physical spacing. Immutable after construction.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0) {
      throw RangeError("grid dimensions must be positive, got " + to_string(dims_));
    }
    if (data_.size() != dims_.size()) {
      throw DimensionMismatch("payload has " + std::to_string(data_.size()) +
                              " voxels but dims " + to_string(dims_) + " need " +
                              std::to_string(dims_.size()));
    }
    spacing_.validate();
  }
  /// Filled with a constant value.
  Grid(Dims dims, Spacing spacing, T fill = T{})
      : Grid(dims, spacing, std::vector<T>(dims.size(), fill)) {}

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const Spacing& spacing() const { return spacing_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] const T& operator[](std::size_t linear) const { return data_[linear]; }
  [[nodiscard]] const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[dims_.index(i, j, k)];
  }

 protected:
  Dims dims_;
  Spacing spacing_;
  std::vector<T> data_;
};

/// Boolean voxel mask (ground-truth indicators or a binarized prediction).
class BinaryMask : public Grid<std::uint8_t> {
 public:
  BinaryMask() = default;
  /// Any nonzero byte is normalized to 1.
  BinaryMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> data);
  BinaryMask(Dims dims, Spacing spacing) : Grid(dims, spacing, std::uint8_t{0}) {}

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] bool empty() const { return count() == 0; }
};

/// Integer label volume. Label 0 is background; nonzero values must be among the
/// declared foreground labels.
class LabelVolume : public Grid<std::int32_t> {
 public:
  static constexpr std::int32_t kPrimaryTumor = 1;
  static constexpr std::int32_t kLymphNode = 2;

  /// Foreground labels of the two-structure convention: {1 = PT, 2 = LN}.
  static std::vector<std::int32_t> default_labels() { return {kPrimaryTumor, kLymphNode}; }

  LabelVolume() = default;
  /// Throws RangeError("unexpected label ...") for values outside {0} ∪ labels.
  LabelVolume(Dims dims, Spacing spacing, std::vector<std::int32_t> data,
              std::vector<std::int32_t> labels = default_labels());

  [[nodiscard]] const std::vector<std::int32_t>& labels() const { return labels_; }
  [[nodiscard]] bool declares(std::int32_t label) const;

 private:
  std::vector<std::int32_t> labels_;
};

/// Per-voxel probabilities in [0, 1].
class ProbVolume : public Grid<double> {
 public:
  ProbVolume() = default;
  /// Throws RangeError when any value is outside [0, 1] or NaN.
  ProbVolume(Dims dims, Spacing spacing, std::vector<double> data);
};

/// Mask that is true exactly where vol == label. Throws RangeError for an undeclared label.
BinaryMask extract_class(const LabelVolume& vol, std::int32_t label);

/// Hard mask as a probability volume (0.0 / 1.0).
ProbVolume to_prob(const BinaryMask& mask);

/// Throws DimensionMismatch unless both grids share dims; spacing is compared too when
/// `check_spacing` is set.
template <typename A, typename B>
void require_same_grid(const Grid<A>& a, const Grid<B>& b, bool check_spacing = false) {
  if (!(a.dims() == b.dims())) {
    throw DimensionMismatch("dimension mismatch: " + to_string(a.dims()) + " vs " +
                            to_string(b.dims()));
  }
  if (check_spacing && !(a.spacing() == b.spacing())) {
    throw DimensionMismatch("spacing mismatch between volumes");
  }
}

}  // namespace lesionmetrics

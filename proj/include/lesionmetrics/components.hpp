#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "lesionmetrics/volume.hpp"

namespace lesionmetrics {

/// Voxel adjacency used to group foreground voxels into lesions.
enum class Connectivity { Face6 = 6, Edge18 = 18, Corner26 = 26 };

/// Accepts "6", "18", "26" (also "face", "edge", "corner").
Connectivity parse_connectivity(const std::string& s);
int neighbor_count(Connectivity c);

/// Relative offsets (di, dj, dk) adjacent under `c`, in lexicographic order.
std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c);

/// Connected-component labeling of a mask. `ids` holds 0 on background and 1..K on
/// foreground; component j has `volumes[j - 1]` voxels.
struct ComponentMap {
  Dims dims;
  Spacing spacing;
  std::vector<std::int32_t> ids;
  std::vector<std::int64_t> volumes;

  [[nodiscard]] std::size_t count() const { return volumes.size(); }
  [[nodiscard]] std::int64_t volume(std::int32_t id) const {
    return volumes.at(static_cast<std::size_t>(id - 1));
  }
  /// ids != 0.
  [[nodiscard]] BinaryMask foreground() const;
};

/// Components are numbered in order of their first voxel in linear (C-order) scan.
ComponentMap label_components(const BinaryMask& mask,
                              Connectivity conn = Connectivity::Corner26);

/// Unit in which a component's size enters its weight.
enum class VolumeUnit { Voxels, CubicMillimeters };

struct WeightMap {
  Dims dims;
  Spacing spacing;
  std::vector<double> w;
};

/// w_i = 1 / sqrt(V_j) for voxels of component j, 0 on background.
WeightMap weight_map(const ComponentMap& comp, VolumeUnit unit = VolumeUnit::Voxels);

/// Thread-safe cache of weight maps keyed by mask content and labeling options. Ground
/// truth is constant across training iterations, so lookups dominate insertions.
class WeightMapCache {
 public:
  std::shared_ptr<const WeightMap> get(const BinaryMask& mask, Connectivity conn,
                                       VolumeUnit unit = VolumeUnit::Voxels);
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t hits() const;

 private:
  struct Entry {
    Dims dims;
    std::vector<std::uint8_t> mask;
    std::shared_ptr<const WeightMap> weights;
  };
  using Key = std::tuple<std::uint64_t, int, int>;

  mutable std::shared_mutex mutex_;
  std::multimap<Key, Entry> entries_;
  std::atomic<std::size_t> hits_{0};
};

}  // namespace lesionmetrics

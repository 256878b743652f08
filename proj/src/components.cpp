#include "lesionmetrics/components.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>

namespace lesionmetrics {

Connectivity parse_connectivity(const std::string& s) {
  if (s == "6" || s == "face" || s == "face-6") return Connectivity::Face6;
  if (s == "18" || s == "edge" || s == "edge-18") return Connectivity::Edge18;
  if (s == "26" || s == "corner" || s == "corner-26") return Connectivity::Corner26;
  throw RangeError("unknown connectivity '" + s + "' (expected 6, 18 or 26)");
}

int neighbor_count(Connectivity c) { return static_cast<int>(c); }

std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c) {
  // Face neighbors differ in one axis, edge in at most two, corner in up to three.
  const int max_axes = c == Connectivity::Face6 ? 1 : c == Connectivity::Edge18 ? 2 : 3;
  std::vector<std::array<int, 3>> out;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int dk = -1; dk <= 1; ++dk) {
        const int axes = std::abs(di) + std::abs(dj) + std::abs(dk);
        if (axes > 0 && axes <= max_axes) out.push_back({di, dj, dk});
      }
    }
  }
  return out;
}

BinaryMask ComponentMap::foreground() const {
  std::vector<std::uint8_t> m(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) m[i] = ids[i] != 0;
  return {dims, spacing, std::move(m)};
}

namespace {

class DisjointSet {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace

ComponentMap label_components(const BinaryMask& mask, Connectivity conn) {
  const Dims d = mask.dims();
  ComponentMap out{d, mask.spacing(), std::vector<std::int32_t>(d.size(), 0), {}};

  // Only neighbors that precede the voxel in scan order are visited in the first pass.
  std::vector<std::array<int, 3>> backward;
  for (const auto& o : neighbor_offsets(conn)) {
    if (o[0] < 0 || (o[0] == 0 && (o[1] < 0 || (o[1] == 0 && o[2] < 0)))) backward.push_back(o);
  }

  DisjointSet sets;
  std::vector<std::int32_t> provisional(d.size(), -1);
  const auto nx = static_cast<long>(d.nx);
  const auto ny = static_cast<long>(d.ny);
  const auto nz = static_cast<long>(d.nz);

  for (long i = 0; i < nx; ++i) {
    for (long j = 0; j < ny; ++j) {
      for (long k = 0; k < nz; ++k) {
        const std::size_t idx = d.index(i, j, k);
        if (!mask[idx]) continue;
        std::int32_t label = -1;
        for (const auto& o : backward) {
          const long a = i + o[0];
          const long b = j + o[1];
          const long c = k + o[2];
          if (a < 0 || b < 0 || c < 0 || b >= ny || c >= nz) continue;
          const std::int32_t nl = provisional[d.index(a, b, c)];
          if (nl < 0) continue;
          if (label < 0) {
            label = nl;
          } else {
            sets.unite(label, nl);
          }
        }
        provisional[idx] = label < 0 ? sets.make() : label;
      }
    }
  }

  // Second pass: final ids in order of first appearance.
  std::vector<std::int32_t> final_id;
  for (std::size_t idx = 0; idx < d.size(); ++idx) {
    if (provisional[idx] < 0) continue;
    const auto root = static_cast<std::size_t>(sets.find(provisional[idx]));
    if (root >= final_id.size()) final_id.resize(root + 1, 0);
    if (final_id[root] == 0) {
      out.volumes.push_back(0);
      final_id[root] = static_cast<std::int32_t>(out.volumes.size());
    }
    out.ids[idx] = final_id[root];
    ++out.volumes[static_cast<std::size_t>(final_id[root] - 1)];
  }
  return out;
}

WeightMap weight_map(const ComponentMap& comp, VolumeUnit unit) {
  const double scale = unit == VolumeUnit::CubicMillimeters ? comp.spacing.voxel_volume() : 1.0;
  std::vector<double> per_component(comp.count());
  for (std::size_t j = 0; j < comp.count(); ++j) {
    per_component[j] = 1.0 / std::sqrt(static_cast<double>(comp.volumes[j]) * scale);
  }
  WeightMap out{comp.dims, comp.spacing, std::vector<double>(comp.ids.size(), 0.0)};
  for (std::size_t i = 0; i < comp.ids.size(); ++i) {
    if (comp.ids[i] != 0) out.w[i] = per_component[static_cast<std::size_t>(comp.ids[i] - 1)];
  }
  return out;
}

namespace {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, const Dims& d) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  mix(d.nx);
  mix(d.ny);
  mix(d.nz);
  for (auto b : bytes) mix(b);
  return h;
}

}  // namespace

std::shared_ptr<const WeightMap> WeightMapCache::get(const BinaryMask& mask, Connectivity conn,
                                                     VolumeUnit unit) {
  const Key key{fnv1a(mask.data(), mask.dims()), static_cast<int>(conn), static_cast<int>(unit)};
  auto matches = [&](const Entry& e) {
    return e.dims == mask.dims() &&
           std::equal(e.mask.begin(), e.mask.end(), mask.data().begin(), mask.data().end()) &&
           e.weights->spacing == mask.spacing();
  };
  {
    std::shared_lock lock(mutex_);
    auto [lo, hi] = entries_.equal_range(key);
    for (auto it = lo; it != hi; ++it) {
      if (matches(it->second)) {
        ++hits_;
        return it->second.weights;
      }
    }
  }
  auto weights =
      std::make_shared<const WeightMap>(weight_map(label_components(mask, conn), unit));
  std::unique_lock lock(mutex_);
  auto [lo, hi] = entries_.equal_range(key);
  for (auto it = lo; it != hi; ++it) {
    if (matches(it->second)) return it->second.weights;
  }
  entries_.emplace(key, Entry{mask.dims(), {mask.data().begin(), mask.data().end()}, weights});
  return weights;
}

std::size_t WeightMapCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t WeightMapCache::hits() const { return hits_.load(); }

}  // namespace lesionmetrics

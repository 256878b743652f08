#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lesionmetrics/volume.hpp"

namespace lesionmetrics {

/// Exposed voxel faces of a mask. A face is exposed when the voxel on its other side is
/// background or outside the grid.
struct SurfaceElementSet {
  /// Face centres in millimetres, relative to the centre of voxel (0,0,0) minus half a voxel.
  std::vector<std::array<double, 3>> positions;
  /// Face areas in mm² (product of the two in-plane spacings).
  std::vector<double> areas;
  /// Face centres on the half-voxel lattice: position = lattice * spacing / 2.
  std::vector<std::array<std::int64_t, 3>> lattice;

  [[nodiscard]] std::size_t size() const { return areas.size(); }
  [[nodiscard]] bool empty() const { return areas.empty(); }
  [[nodiscard]] double total_area() const;
};

SurfaceElementSet extract_surface(const BinaryMask& mask);

/// Distances from each element of one surface to the nearest element of the other,
/// sorted ascending, with the element areas carried alongside.
struct DirectedDistances {
  std::vector<double> distances;
  std::vector<double> areas;

  [[nodiscard]] double total_area() const;
};

struct SurfaceDistances {
  DirectedDistances gt_to_pred;
  DirectedDistances pred_to_gt;
};

/// Throws UndefinedDistances when both masks are empty. When exactly one is empty the
/// other side's distances are all +infinity.
SurfaceDistances surface_distances(const BinaryMask& gt, const BinaryMask& pred);

/// Fraction of total surface area lying within `tolerance_mm` of the other surface.
double surface_dice(const SurfaceDistances& d, double tolerance_mm);

/// Area-weighted mean over both directions pooled; +inf if any distance is infinite.
double mean_surface_distance(const SurfaceDistances& d);

/// Area-weighted percentile (0..100) of one direction. The cumulative area is linearly
/// interpolated between consecutive distinct distances, ties pooled; percentiles at or below the first
/// element's share return the smallest distance. NaN for an empty set.
double directed_percentile(const DirectedDistances& d, double percent);

/// Maximum of the two directed 95th percentiles.
double hd95(const SurfaceDistances& d);

/// Squared Euclidean distance transform of `sources` (nonzero entries) over an
/// anisotropic grid. Background-only grids yield +infinity everywhere.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& sources,
                                               const std::array<std::size_t, 3>& shape,
                                               const std::array<double, 3>& spacing);

}  // namespace lesionmetrics

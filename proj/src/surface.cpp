#include "lesionmetrics/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lesionmetrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one grid line.
void edt_line(const double* f, double* out, std::size_t n, double h, std::vector<std::size_t>& v,
              std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  long k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    const double fq = f[q] + (q * h) * (q * h);
    double s = -kInf;
    while (k >= 0) {
      const std::size_t p = v[static_cast<std::size_t>(k)];
      s = (fq - (f[p] + (p * h) * (p * h))) / (2.0 * h * static_cast<double>(q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    if (k < 0) s = -kInf;
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
  }
  if (k < 0) {
    std::fill(out, out + n, kInf);
    return;
  }
  z[static_cast<std::size_t>(k) + 1] = kInf;
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double x = q * h;
    while (z[j + 1] < x) ++j;
    const double dx = x - v[j] * h;
    out[q] = dx * dx + f[v[j]];
  }
}

DirectedDistances sorted_distances(std::vector<double> dist, const std::vector<double>& areas) {
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  DirectedDistances out;
  out.distances.reserve(order.size());
  out.areas.reserve(order.size());
  for (auto i : order) {
    out.distances.push_back(dist[i]);
    out.areas.push_back(areas[i]);
  }
  return out;
}

}  // namespace

double SurfaceElementSet::total_area() const { return sum(areas); }
double DirectedDistances::total_area() const { return sum(areas); }

SurfaceElementSet extract_surface(const BinaryMask& mask) {
  const Dims d = mask.dims();
  const Spacing sp = mask.spacing();
  const std::array<double, 3> face_area{sp.dy * sp.dz, sp.dx * sp.dz, sp.dx * sp.dy};
  const std::array<double, 3> half{sp.dx / 2.0, sp.dy / 2.0, sp.dz / 2.0};
  const std::array<long, 3> n{static_cast<long>(d.nx), static_cast<long>(d.ny),
                              static_cast<long>(d.nz)};

  SurfaceElementSet out;
  for (long i = 0; i < n[0]; ++i) {
    for (long j = 0; j < n[1]; ++j) {
      for (long k = 0; k < n[2]; ++k) {
        if (!mask.at(i, j, k)) continue;
        const std::array<long, 3> c{i, j, k};
        for (std::size_t axis = 0; axis < 3; ++axis) {
          for (int side : {-1, 1}) {
            auto nb = c;
            nb[axis] += side;
            const bool inside = nb[axis] >= 0 && nb[axis] < n[axis];
            if (inside && mask.at(nb[0], nb[1], nb[2])) continue;
            std::array<std::int64_t, 3> lat{2 * i + 1, 2 * j + 1, 2 * k + 1};
            lat[axis] += side;
            out.lattice.push_back(lat);
            out.positions.push_back({lat[0] * half[0], lat[1] * half[1], lat[2] * half[2]});
            out.areas.push_back(face_area[axis]);
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& sources,
                                               const std::array<std::size_t, 3>& shape,
                                               const std::array<double, 3>& spacing) {
  const std::size_t total = shape[0] * shape[1] * shape[2];
  if (sources.size() != total) throw DimensionMismatch("source grid does not match shape");
  std::vector<double> f(total);
  for (std::size_t i = 0; i < total; ++i) f[i] = sources[i] ? 0.0 : kInf;

  const std::array<std::size_t, 3> stride{shape[1] * shape[2], shape[2], 1};
  std::vector<double> line_in;
  std::vector<double> line_out;
  std::vector<std::size_t> v;
  std::vector<double> z;
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::size_t n = shape[axis];
    line_in.resize(n);
    line_out.resize(n);
    const std::size_t a1 = axis == 0 ? 1 : 0;
    const std::size_t a2 = axis == 2 ? 1 : 2;
    for (std::size_t u = 0; u < shape[a1]; ++u) {
      for (std::size_t w = 0; w < shape[a2]; ++w) {
        const std::size_t base = u * stride[a1] + w * stride[a2];
        for (std::size_t q = 0; q < n; ++q) line_in[q] = f[base + q * stride[axis]];
        edt_line(line_in.data(), line_out.data(), n, spacing[axis], v, z);
        for (std::size_t q = 0; q < n; ++q) f[base + q * stride[axis]] = line_out[q];
      }
    }
  }
  return f;
}

namespace {

// Nearest distance from every element of `from` to the element set `to`, evaluated on the
// half-voxel lattice cropped to the bounding box of both sets.
std::vector<double> nearest_distances(const SurfaceElementSet& from, const SurfaceElementSet& to,
                                      const Spacing& sp) {
  std::array<std::int64_t, 3> lo{};
  std::array<std::int64_t, 3> hi{};
  lo.fill(std::numeric_limits<std::int64_t>::max());
  hi.fill(std::numeric_limits<std::int64_t>::min());
  for (const auto* set : {&from, &to}) {
    for (const auto& l : set->lattice) {
      for (std::size_t a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], l[a]);
        hi[a] = std::max(hi[a], l[a]);
      }
    }
  }
  std::array<std::size_t, 3> shape{};
  for (std::size_t a = 0; a < 3; ++a) shape[a] = static_cast<std::size_t>(hi[a] - lo[a] + 1);
  auto flat = [&](const std::array<std::int64_t, 3>& l) {
    return (static_cast<std::size_t>(l[0] - lo[0]) * shape[1] +
            static_cast<std::size_t>(l[1] - lo[1])) * shape[2] +
           static_cast<std::size_t>(l[2] - lo[2]);
  };

  std::vector<std::uint8_t> sources(shape[0] * shape[1] * shape[2], 0);
  for (const auto& l : to.lattice) sources[flat(l)] = 1;
  const auto sq = squared_distance_transform(sources, shape,
                                             {sp.dx / 2.0, sp.dy / 2.0, sp.dz / 2.0});
  std::vector<double> out(from.size());
  for (std::size_t e = 0; e < from.size(); ++e) out[e] = std::sqrt(sq[flat(from.lattice[e])]);
  return out;
}

}  // namespace

SurfaceDistances surface_distances(const BinaryMask& gt, const BinaryMask& pred) {
  require_same_grid(gt, pred, true);
  const auto gs = extract_surface(gt);
  const auto ps = extract_surface(pred);
  if (gs.empty() && ps.empty()) throw UndefinedDistances("undefined distances: both masks are empty");

  SurfaceDistances out;
  if (gs.empty() || ps.empty()) {
    out.gt_to_pred = sorted_distances(std::vector<double>(gs.size(), kInf), gs.areas);
    out.pred_to_gt = sorted_distances(std::vector<double>(ps.size(), kInf), ps.areas);
    return out;
  }
  out.gt_to_pred = sorted_distances(nearest_distances(gs, ps, gt.spacing()), gs.areas);
  out.pred_to_gt = sorted_distances(nearest_distances(ps, gs, gt.spacing()), ps.areas);
  return out;
}

double surface_dice(const SurfaceDistances& d, double tolerance_mm) {
  if (!(tolerance_mm >= 0.0)) throw RangeError("tolerance must be non-negative");
  double within = 0.0;
  double total = 0.0;
  for (const auto* dir : {&d.gt_to_pred, &d.pred_to_gt}) {
    for (std::size_t i = 0; i < dir->distances.size(); ++i) {
      if (dir->distances[i] <= tolerance_mm) within += dir->areas[i];
      total += dir->areas[i];
    }
  }
  if (total == 0.0) throw UndefinedDistances("undefined distances: both surfaces are empty");
  return within / total;
}

double mean_surface_distance(const SurfaceDistances& d) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto* dir : {&d.gt_to_pred, &d.pred_to_gt}) {
    for (std::size_t i = 0; i < dir->distances.size(); ++i) {
      if (std::isinf(dir->distances[i])) return kInf;
      weighted += dir->areas[i] * dir->distances[i];
      total += dir->areas[i];
    }
  }
  if (total == 0.0) throw UndefinedDistances("undefined distances: both surfaces are empty");
  return weighted / total;
}

double directed_percentile(const DirectedDistances& d, double percent) {
  if (!(percent >= 0.0 && percent <= 100.0)) throw RangeError("percentile must lie in [0, 100]");
  if (d.distances.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double target = percent / 100.0 * d.total_area();
  // Knots are (distance, cumulative area) with tied distances merged into one knot.
  double cum_prev = 0.0;
  double lo = d.distances[0];
  std::size_t i = 0;
  while (i < d.distances.size()) {
    const double hi = d.distances[i];
    double cum = cum_prev;
    while (i < d.distances.size() && d.distances[i] == hi) cum += d.areas[i++];
    if (cum >= target || i == d.distances.size()) {
      if (cum_prev == 0.0 || std::isinf(hi)) return hi;
      const double frac = std::clamp((target - cum_prev) / (cum - cum_prev), 0.0, 1.0);
      return lo + frac * (hi - lo);
    }
    cum_prev = cum;
    lo = hi;
  }
  return d.distances.back();
}

double hd95(const SurfaceDistances& d) {
  if (d.gt_to_pred.distances.empty() && d.pred_to_gt.distances.empty()) {
    throw UndefinedDistances("undefined distances: both surfaces are empty");
  }
  double out = -kInf;
  for (const auto* dir : {&d.gt_to_pred, &d.pred_to_gt}) {
    if (!dir->distances.empty()) out = std::max(out, directed_percentile(*dir, 95.0));
  }
  return out;
}

}  // namespace lesionmetrics

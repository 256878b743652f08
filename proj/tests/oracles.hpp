#pragma once

// Brute-force reference implementations used only by the tests. They share no code
// with the library beyond the voxel index layout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "lesionmetrics/volume.hpp"

namespace oracle {

using lesionmetrics::BinaryMask;
using lesionmetrics::Dims;
using lesionmetrics::Spacing;

inline bool adjacent(int di, int dj, int dk, int connectivity) {
  const int l1 = std::abs(di) + std::abs(dj) + std::abs(dk);
  if (l1 == 0) return false;
  if (connectivity == 6) return l1 == 1;
  if (connectivity == 18) return l1 <= 2;
  return true;
}

/// Breadth-first flood fill; ids numbered by first voxel in scan order.
inline std::vector<int> flood_fill(const BinaryMask& m, int connectivity) {
  const Dims d = m.dims();
  std::vector<int> ids(d.size(), 0);
  int next = 0;
  for (std::size_t seed = 0; seed < d.size(); ++seed) {
    if (m[seed] == 0 || ids[seed] != 0) continue;
    ids[seed] = ++next;
    std::deque<std::size_t> queue{seed};
    while (!queue.empty()) {
      const auto c = d.coords(queue.front());
      queue.pop_front();
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          for (int dk = -1; dk <= 1; ++dk) {
            if (!adjacent(di, dj, dk, connectivity)) continue;
            const long i = static_cast<long>(c[0]) + di;
            const long j = static_cast<long>(c[1]) + dj;
            const long k = static_cast<long>(c[2]) + dk;
            if (i < 0 || j < 0 || k < 0 || i >= static_cast<long>(d.nx) ||
                j >= static_cast<long>(d.ny) || k >= static_cast<long>(d.nz)) {
              continue;
            }
            const auto n = d.index(i, j, k);
            if (m[n] != 0 && ids[n] == 0) {
              ids[n] = next;
              queue.push_back(n);
            }
          }
        }
      }
    }
  }
  return ids;
}

/// True when two labelings induce the same partition of the foreground.
inline bool same_partition(const std::vector<int>& a, const std::vector<std::int32_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab;
  std::map<int, int> ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (a[i] == 0) continue;
    const auto [x, ins_x] = ab.emplace(a[i], b[i]);
    const auto [y, ins_y] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

struct Face {
  std::array<double, 3> pos;
  double area;
};

/// Exposed faces with positions measured from the grid corner.
inline std::vector<Face> faces(const BinaryMask& m) {
  const Dims d = m.dims();
  const Spacing s = m.spacing();
  const std::array<double, 3> sp{s.dx, s.dy, s.dz};
  const std::array<long, 3> n{static_cast<long>(d.nx), static_cast<long>(d.ny),
                              static_cast<long>(d.nz)};
  std::vector<Face> out;
  for (long i = 0; i < n[0]; ++i) {
    for (long j = 0; j < n[1]; ++j) {
      for (long k = 0; k < n[2]; ++k) {
        if (m.at(i, j, k) == 0) continue;
        for (int axis = 0; axis < 3; ++axis) {
          for (int side : {-1, 1}) {
            std::array<long, 3> nb{i, j, k};
            nb[axis] += side;
            const bool outside = nb[axis] < 0 || nb[axis] >= n[axis];
            if (!outside && m.at(nb[0], nb[1], nb[2]) != 0) continue;
            Face f{};
            const std::array<long, 3> c{i, j, k};
            for (int a = 0; a < 3; ++a) {
              const long half = 2 * c[a] + 1 + (a == axis ? side : 0);
              f.pos[a] = static_cast<double>(half) * 0.5 * sp[a];
            }
            f.area = sp[(axis + 1) % 3] * sp[(axis + 2) % 3];
            out.push_back(f);
          }
        }
      }
    }
  }
  return out;
}

struct Directed {
  std::vector<double> dist;
  std::vector<double> area;
};

/// Nearest distance from every face of `from` to any face of `to`, sorted by distance.
inline Directed directed(const std::vector<Face>& from, const std::vector<Face>& to) {
  std::vector<std::pair<double, double>> rows;
  for (const auto& f : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : to) {
      const double dx = f.pos[0] - t.pos[0];
      const double dy = f.pos[1] - t.pos[1];
      const double dz = f.pos[2] - t.pos[2];
      best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    rows.emplace_back(best, f.area);
  }
  std::sort(rows.begin(), rows.end());
  Directed out;
  for (const auto& [d, a] : rows) {
    out.dist.push_back(d);
    out.area.push_back(a);
  }
  return out;
}

inline double sds(const Directed& a, const Directed& b, double tol) {
  double hit = 0.0;
  double total = 0.0;
  for (const auto* s : {&a, &b}) {
    for (std::size_t i = 0; i < s->dist.size(); ++i) {
      total += s->area[i];
      if (s->dist[i] <= tol) hit += s->area[i];
    }
  }
  return hit / total;
}

inline double msd(const Directed& a, const Directed& b) {
  double num = 0.0;
  double den = 0.0;
  for (const auto* s : {&a, &b}) {
    for (std::size_t i = 0; i < s->dist.size(); ++i) {
      num += s->dist[i] * s->area[i];
      den += s->area[i];
    }
  }
  return num / den;
}

/// Piecewise-linear inverse of the cumulative area fraction through (d_i, C_i).
inline double percentile(const Directed& s, double q) {
  double total = 0.0;
  for (double a : s.area) total += a;
  std::map<double, double> area_at;
  for (std::size_t i = 0; i < s.dist.size(); ++i) area_at[s.dist[i]] += s.area[i];
  std::vector<double> dist;
  std::vector<double> cum;
  double run = 0.0;
  for (const auto& [d, a] : area_at) {
    run += a;
    dist.push_back(d);
    cum.push_back(run / total);
  }
  if (q <= cum[0]) return dist[0];
  for (std::size_t i = 1; i < cum.size(); ++i) {
    if (q <= cum[i]) {
      const double t = (q - cum[i - 1]) / (cum[i] - cum[i - 1]);
      return dist[i - 1] + t * (dist[i] - dist[i - 1]);
    }
  }
  return dist.back();
}

inline double hd95(const Directed& a, const Directed& b) {
  return std::max(percentile(a, 0.95), percentile(b, 0.95));
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign assignments of the
/// given (average) ranks.
inline double wilcoxon_enumerated(const std::vector<double>& ranks, double w_plus) {
  const std::size_t n = ranks.size();
  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t lower = 0;
  std::uint64_t upper = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) w += ranks[i];
    }
    if (w <= w_plus + 1e-9) ++lower;
    if (w >= w_plus - 1e-9) ++upper;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) /
                           static_cast<double>(total));
}

/// Voxel count of a ball by centre-distance test.
inline std::size_t ball_voxels(double radius, const Spacing& s) {
  const long rx = static_cast<long>(radius / s.dx) + 1;
  const long ry = static_cast<long>(radius / s.dy) + 1;
  const long rz = static_cast<long>(radius / s.dz) + 1;
  std::size_t count = 0;
  for (long i = -rx; i <= rx; ++i) {
    for (long j = -ry; j <= ry; ++j) {
      for (long k = -rz; k <= rz; ++k) {
        const double x = i * s.dx;
        const double y = j * s.dy;
        const double z = k * s.dz;
        if (x * x + y * y + z * z <= radius * radius) ++count;
      }
    }
  }
  return count;
}

/// Random mask of random extent and fill density.
inline BinaryMask random_mask(std::mt19937_64& rng, std::size_t max_side, Spacing sp = {},
                              double density = -1.0) {
  std::uniform_int_distribution<std::size_t> side(1, max_side);
  const Dims d{side(rng), side(rng), side(rng)};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rho = density >= 0.0 ? density : 0.05 + 0.5 * u(rng);
  std::vector<std::uint8_t> v(d.size());
  for (auto& x : v) x = u(rng) < rho ? 1 : 0;
  return {d, sp, std::move(v)};
}

inline BinaryMask random_mask_like(std::mt19937_64& rng, const Dims& d, Spacing sp,
                                   double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> v(d.size());
  for (auto& x : v) x = u(rng) < density ? 1 : 0;
  return {d, sp, std::move(v)};
}

}  // namespace oracle

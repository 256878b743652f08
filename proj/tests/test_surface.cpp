#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lesionmetrics/surface.hpp"
#include "oracles.hpp"

namespace lm = lesionmetrics;

namespace {

lm::BinaryMask voxels(lm::Dims d, lm::Spacing sp, const std::vector<std::array<std::size_t, 3>>& on) {
  std::vector<std::uint8_t> v(d.size(), 0);
  for (const auto& c : on) v[d.index(c[0], c[1], c[2])] = 1;
  return {d, sp, std::move(v)};
}

lm::DirectedDistances directed(std::vector<double> d, std::vector<double> a) {
  lm::DirectedDistances out;
  out.distances = std::move(d);
  out.areas = std::move(a);
  return out;
}

}  // namespace

TEST_CASE("face enumeration") {
  const auto one = lm::extract_surface(voxels({3, 3, 3}, {}, {{1, 1, 1}}));
  CHECK(one.size() == 6);
  CHECK(one.total_area() == doctest::Approx(6.0));

  const auto block = lm::extract_surface(voxels({3, 3, 3}, {}, {{0, 1, 1}, {1, 1, 1}}));
  CHECK(block.size() == 10);

  const auto aniso = lm::extract_surface(voxels({3, 3, 3}, {1, 2, 3}, {{1, 1, 1}}));
  auto areas = aniso.areas;
  std::sort(areas.begin(), areas.end());
  CHECK(areas == std::vector<double>{2, 2, 3, 3, 6, 6});
  CHECK(aniso.total_area() == doctest::Approx(22.0));

  const auto corner = lm::extract_surface(voxels({1, 1, 1}, {}, {{0, 0, 0}}));
  CHECK(corner.size() == 6);
  CHECK(lm::extract_surface(lm::BinaryMask({2, 2, 2}, {})).empty());
}

TEST_CASE("face positions match the oracle enumeration") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_mask(rng, 5, {0.5, 1.5, 2.0});
    const auto s = lm::extract_surface(m);
    const auto ref = oracle::faces(m);
    REQUIRE(s.size() == ref.size());
    std::vector<std::array<double, 4>> a, b;
    for (std::size_t i = 0; i < s.size(); ++i) {
      a.push_back({s.positions[i][0], s.positions[i][1], s.positions[i][2], s.areas[i]});
      b.push_back({ref[i].pos[0], ref[i].pos[1], ref[i].pos[2], ref[i].area});
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (int c = 0; c < 4; ++c) CHECK(a[i][c] == doctest::Approx(b[i][c]));
    }
  }
}

TEST_CASE("identical masks have zero distances") {
  std::mt19937_64 rng(6);
  const auto m = oracle::random_mask_like(rng, {6, 5, 4}, {1, 2, 3}, 0.4);
  const auto d = lm::surface_distances(m, m);
  for (double x : d.gt_to_pred.distances) CHECK(x == 0.0);
  CHECK(lm::surface_dice(d, 0.0) == 1.0);
  CHECK(lm::mean_surface_distance(d) == 0.0);
  CHECK(lm::hd95(d) == 0.0);
}

TEST_CASE("two voxels along x with spacing (2,1,1)") {
  const lm::Dims dims{8, 3, 3};
  const auto a = voxels(dims, {2, 1, 1}, {{1, 1, 1}});
  const auto b = voxels(dims, {2, 1, 1}, {{6, 1, 1}});
  const auto d = lm::surface_distances(a, b);
  const auto ref = oracle::directed(oracle::faces(a), oracle::faces(b));
  REQUIRE(d.gt_to_pred.distances.size() == ref.dist.size());
  for (std::size_t i = 0; i < ref.dist.size(); ++i) {
    CHECK(d.gt_to_pred.distances[i] == doctest::Approx(ref.dist[i]).epsilon(1e-12));
  }
  // Facing faces sit at x = 4 mm and x = 12 mm; voxel centres are 10 mm apart.
  CHECK(d.gt_to_pred.distances.front() == doctest::Approx(8.0));
  CHECK(std::count_if(d.gt_to_pred.distances.begin(), d.gt_to_pred.distances.end(),
                      [](double x) { return std::fabs(x - 10.0) < 1e-9; }) == 1);
}

TEST_CASE("empty masks") {
  const lm::BinaryMask empty({4, 4, 4}, {});
  const auto full = voxels({4, 4, 4}, {}, {{1, 1, 1}, {2, 2, 2}});
  CHECK_THROWS_AS(lm::surface_distances(empty, empty), lm::UndefinedDistances);
  const auto d = lm::surface_distances(full, empty);
  CHECK(d.pred_to_gt.distances.empty());
  for (double x : d.gt_to_pred.distances) CHECK(std::isinf(x));
  CHECK(lm::surface_dice(d, 5.0) == 0.0);
  CHECK(std::isinf(lm::mean_surface_distance(d)));
  CHECK(std::isinf(lm::hd95(d)));
}

TEST_CASE("mismatched grids are rejected") {
  const lm::BinaryMask a({4, 4, 4}, {});
  const lm::BinaryMask b({4, 4, 5}, {});
  const lm::BinaryMask c({4, 4, 4}, {1, 1, 2});
  CHECK_THROWS_AS(lm::surface_distances(a, b), lm::DimensionMismatch);
  CHECK_THROWS_AS(lm::surface_distances(a, c), lm::DimensionMismatch);
}

TEST_CASE("disjoint far masks") {
  const lm::Dims dims{20, 3, 3};
  const auto d = lm::surface_distances(voxels(dims, {}, {{0, 1, 1}}), voxels(dims, {}, {{19, 1, 1}}));
  CHECK(lm::surface_dice(d, 2.0) == 0.0);
}

TEST_CASE("percentile definition") {
  // Equal areas: same as numpy's interpolated_inverted_cdf.
  const auto eq = directed({1, 2, 3, 4}, {1, 1, 1, 1});
  CHECK(lm::directed_percentile(eq, 95) == doctest::Approx(3.8));
  CHECK(lm::directed_percentile(eq, 50) == doctest::Approx(2.0));
  CHECK(lm::directed_percentile(eq, 10) == doctest::Approx(1.0));
  CHECK(lm::directed_percentile(eq, 100) == doctest::Approx(4.0));

  const auto weighted = directed({0, 10}, {9, 1});
  CHECK(lm::directed_percentile(weighted, 95) == doctest::Approx(5.0));
  CHECK(lm::directed_percentile(weighted, 90) == doctest::Approx(0.0));

  lm::SurfaceDistances sd;
  sd.gt_to_pred = directed(std::vector<double>(20, 3.0), std::vector<double>(20, 1.0));
  sd.pred_to_gt = directed(std::vector<double>(20, 7.0), std::vector<double>(20, 1.0));
  CHECK(lm::hd95(sd) == 7.0);
  CHECK(lm::mean_surface_distance(sd) == doctest::Approx(5.0));
  CHECK_THROWS_AS(lm::directed_percentile(eq, 101), lm::RangeError);
}

TEST_CASE("metrics match all-pairs brute force") {
  std::mt19937_64 rng(77);
  const std::vector<lm::Spacing> spacings{{1, 1, 1}, {1, 2, 3}, {0.5, 0.5, 2.0}};
  for (int t = 0; t < 40; ++t) {
    const auto sp = spacings[t % spacings.size()];
    std::uniform_int_distribution<std::size_t> side(1, 7);
    const lm::Dims dims{side(rng), side(rng), side(rng)};
    const auto a = oracle::random_mask_like(rng, dims, sp, 0.3);
    const auto b = oracle::random_mask_like(rng, dims, sp, 0.3);
    if (a.empty() || b.empty()) continue;
    const auto d = lm::surface_distances(a, b);
    const auto ra = oracle::directed(oracle::faces(a), oracle::faces(b));
    const auto rb = oracle::directed(oracle::faces(b), oracle::faces(a));
    REQUIRE(d.gt_to_pred.distances.size() == ra.dist.size());
    for (std::size_t i = 0; i < ra.dist.size(); ++i) {
      CHECK(std::fabs(d.gt_to_pred.distances[i] - ra.dist[i]) < 1e-9);
    }
    for (double tol : {0.0, 0.5, 1.0, 2.0}) {
      CHECK(std::fabs(lm::surface_dice(d, tol) - oracle::sds(ra, rb, tol)) < 1e-9);
    }
    CHECK(std::fabs(lm::mean_surface_distance(d) - oracle::msd(ra, rb)) < 1e-9);
    CHECK(std::fabs(lm::hd95(d) - oracle::hd95(ra, rb)) < 1e-9);
  }
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(13);
  for (std::size_t t = 0; t < 15; ++t) {
    const std::array<std::size_t, 3> shape{3 + t % 4, 2 + t % 5, 4};
    const std::array<double, 3> sp{1.0, 0.5 + t % 3, 2.0};
    std::vector<std::uint8_t> src(shape[0] * shape[1] * shape[2], 0);
    std::bernoulli_distribution on(0.1);
    for (auto& x : src) x = on(rng);
    const auto dt = lm::squared_distance_transform(src, shape, sp);
    const lm::Dims d{shape[0], shape[1], shape[2]};
    for (std::size_t i = 0; i < src.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      const auto ci = d.coords(i);
      for (std::size_t j = 0; j < src.size(); ++j) {
        if (!src[j]) continue;
        const auto cj = d.coords(j);
        double s = 0;
        for (int a = 0; a < 3; ++a) {
          const double diff = (static_cast<double>(ci[a]) - static_cast<double>(cj[a])) * sp[a];
          s += diff * diff;
        }
        best = std::min(best, s);
      }
      if (std::isinf(best)) {
        CHECK(std::isinf(dt[i]));
      } else {
        CHECK(dt[i] == doctest::Approx(best));
      }
    }
  }
}

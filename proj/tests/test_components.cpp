#include <doctest.h>

#include <random>
#include <thread>

#include "lesionmetrics/components.hpp"
#include "oracles.hpp"

namespace lm = lesionmetrics;

namespace {

lm::BinaryMask from_coords(lm::Dims d, const std::vector<std::array<std::size_t, 3>>& on,
                           lm::Spacing sp = {}) {
  std::vector<std::uint8_t> v(d.size(), 0);
  for (const auto& c : on) v[d.index(c[0], c[1], c[2])] = 1;
  return {d, sp, std::move(v)};
}

}  // namespace

TEST_CASE("single voxel") {
  const auto c = lm::label_components(from_coords({3, 3, 3}, {{1, 1, 1}}));
  CHECK(c.count() == 1);
  CHECK(c.volume(1) == 1);
}

TEST_CASE("corner contact depends on connectivity") {
  const auto m = from_coords({2, 2, 2}, {{0, 0, 0}, {1, 1, 1}});
  CHECK(lm::label_components(m, lm::Connectivity::Corner26).count() == 1);
  CHECK(lm::label_components(m, lm::Connectivity::Edge18).count() == 2);
  CHECK(lm::label_components(m, lm::Connectivity::Face6).count() == 2);

  const auto edge = from_coords({2, 2, 1}, {{0, 0, 0}, {1, 1, 0}});
  CHECK(lm::label_components(edge, lm::Connectivity::Edge18).count() == 1);
  CHECK(lm::label_components(edge, lm::Connectivity::Face6).count() == 2);
}

TEST_CASE("hollow shell is one face-connected component") {
  std::vector<std::array<std::size_t, 3>> on;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (!(i == 1 && j == 1 && k == 1)) on.push_back({i, j, k});
      }
    }
  }
  const auto c = lm::label_components(from_coords({3, 3, 3}, on), lm::Connectivity::Face6);
  CHECK(c.count() == 1);
  CHECK(c.volume(1) == 26);
}

TEST_CASE("ids follow first appearance in scan order") {
  const auto m = from_coords({1, 1, 7}, {{0, 0, 1}, {0, 0, 2}, {0, 0, 4}, {0, 0, 6}});
  const auto c = lm::label_components(m);
  CHECK(c.ids == std::vector<std::int32_t>{0, 1, 1, 0, 2, 0, 3});
  CHECK(c.volumes == std::vector<std::int64_t>{2, 1, 1});
}

TEST_CASE("U shape merges labels from both arms") {
  // Two arms meet only at the bottom row, forcing a union in the first pass.
  const auto m = from_coords({1, 3, 3}, {{0, 0, 0}, {0, 1, 0}, {0, 2, 0}, {0, 2, 1}, {0, 2, 2},
                                         {0, 1, 2}, {0, 0, 2}});
  const auto c = lm::label_components(m, lm::Connectivity::Face6);
  CHECK(c.count() == 1);
  CHECK(c.volume(1) == 7);
}

TEST_CASE("parse_connectivity") {
  CHECK(lm::parse_connectivity("6") == lm::Connectivity::Face6);
  CHECK(lm::parse_connectivity("18") == lm::Connectivity::Edge18);
  CHECK(lm::parse_connectivity("26") == lm::Connectivity::Corner26);
  CHECK_THROWS_AS(lm::parse_connectivity("8"), lm::RangeError);
  CHECK(lm::neighbor_offsets(lm::Connectivity::Edge18).size() == 18);
}

TEST_CASE("flood-fill oracle on random masks") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = oracle::random_mask(rng, 9);
    for (int conn : {6, 18, 26}) {
      const auto c = lm::label_components(m, static_cast<lm::Connectivity>(conn));
      const auto ref = oracle::flood_fill(m, conn);
      REQUIRE(oracle::same_partition(ref, c.ids));
      // Both number components by first appearance, so the labels agree exactly.
      CHECK(std::equal(ref.begin(), ref.end(), c.ids.begin()));
      std::int64_t total = 0;
      for (auto v : c.volumes) total += v;
      CHECK(total == static_cast<std::int64_t>(m.count()));
    }
  }
}

TEST_CASE("connectivity refines partitions") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = oracle::random_mask(rng, 8);
    const auto c6 = lm::label_components(m, lm::Connectivity::Face6).count();
    const auto c18 = lm::label_components(m, lm::Connectivity::Edge18).count();
    const auto c26 = lm::label_components(m, lm::Connectivity::Corner26).count();
    CHECK(c6 >= c18);
    CHECK(c18 >= c26);
  }
}

TEST_CASE("weight map") {
  std::vector<std::array<std::size_t, 3>> on{{0, 0, 0}};
  for (std::size_t j = 0; j < 10; ++j) {
    for (std::size_t k = 0; k < 10; ++k) on.push_back({3, j, k});
  }
  const auto m = from_coords({5, 10, 10}, on, {1.0, 2.0, 2.0});
  const auto comp = lm::label_components(m);
  const auto w = lm::weight_map(comp);
  CHECK(w.w[m.dims().index(0, 0, 0)] == doctest::Approx(1.0));
  CHECK(w.w[m.dims().index(3, 4, 4)] == doctest::Approx(0.1));
  CHECK(w.w[m.dims().index(2, 4, 4)] == 0.0);

  const auto wmm = lm::weight_map(comp, lm::VolumeUnit::CubicMillimeters);
  CHECK(wmm.w[m.dims().index(0, 0, 0)] == doctest::Approx(0.5));
  CHECK(wmm.w[m.dims().index(3, 4, 4)] == doctest::Approx(0.05));

  const auto empty = lm::weight_map(lm::label_components(lm::BinaryMask({4, 4, 4}, {})));
  CHECK(std::all_of(empty.w.begin(), empty.w.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("weight cache returns shared entries under concurrency") {
  std::mt19937_64 rng(3);
  const auto a = oracle::random_mask_like(rng, {6, 6, 6}, {}, 0.3);
  const auto b = oracle::random_mask_like(rng, {6, 6, 6}, {}, 0.3);
  lm::WeightMapCache cache;
  const auto first = cache.get(a, lm::Connectivity::Corner26);
  std::vector<std::thread> pool;
  std::vector<std::shared_ptr<const lm::WeightMap>> seen(8);
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&, t] { seen[t] = cache.get(t % 2 ? a : b, lm::Connectivity::Corner26); });
  }
  for (auto& t : pool) t.join();
  for (int t = 1; t < 8; t += 2) CHECK(seen[t] == first);
  CHECK(cache.size() == 2);
  CHECK(cache.get(a, lm::Connectivity::Face6) != first);
  CHECK(cache.size() == 3);
  const auto direct = lm::weight_map(lm::label_components(b));
  CHECK(seen[0]->w == direct.w);
}

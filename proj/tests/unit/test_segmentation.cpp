#include <doctest.h>

#include <random>

#include "atscc/segmentation.hpp"
#include "support/oracles.hpp"

using namespace atscc;
using namespace atscc::segmentation;

TEST_SUITE("segmentation") {
  TEST_CASE("straight line keeps only the endpoints") {
    std::vector<Vec3> line;
    for (int i = 0; i < 10; ++i) line.push_back({0.1 * i, 0.05 * i, 0.0});
    auto mask = rdp_mask(line, {0.01});
    SignificanceMask expect(10, 0);
    expect.front() = expect.back() = 1;
    CHECK(mask == expect);
    CHECK(assign_segment_ids(mask) == SegmentIds(10, 1));
  }

  TEST_CASE("single corner") {
    std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {2, 2, 0}};
    auto mask = rdp_mask(pts, {0.1});
    CHECK(mask == SignificanceMask{1, 0, 1, 0, 1});
    CHECK(assign_segment_ids(mask) == SegmentIds{1, 1, 2, 2, 2});
  }

  TEST_CASE("segment id examples") {
    CHECK(assign_segment_ids({1, 0, 0, 1, 0, 1}) == SegmentIds{1, 1, 1, 2, 2, 2});
    CHECK(assign_segment_ids({1, 1}) == SegmentIds{1, 1});
    CHECK(assign_segment_ids({1, 1, 1, 1}) == SegmentIds{1, 2, 3, 3});
  }

  TEST_CASE("ties go to the lowest index") {
    std::vector<Vec3> pts{{0, 0, 0}, {1, 1, 0}, {2, 1, 0}, {3, 0, 0}};
    auto mask = rdp_mask(pts, {0.5});
    CHECK(mask[1] == 1);
    CHECK(mask == oracle::rdp_recursive(pts, 0.5));
  }

  TEST_CASE("argument checks") {
    std::vector<Vec3> one{{0, 0, 0}};
    std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(rdp_mask(one, {0.1}), std::invalid_argument);
    CHECK_THROWS_AS(rdp_mask(two, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(rdp_mask(two, {-1.0}), std::invalid_argument);
    CHECK(rdp_mask(two, {0.1}) == SignificanceMask{1, 1});
  }

  TEST_CASE("perpendicular distance") {
    CHECK(perpendicular_distance({0, 1, 0}, {-1, 0, 0}, {1, 0, 0}) == doctest::Approx(1.0));
    CHECK(perpendicular_distance({5, 1, 0}, {-1, 0, 0}, {1, 0, 0}) == doctest::Approx(1.0));
    CHECK(perpendicular_distance({3, 4, 0}, {0, 0, 0}, {0, 0, 0}) == doctest::Approx(5.0));
    CHECK(perpendicular_distance({0, 0, 2}, {0, 0, 0}, {1, 1, 0}) == doctest::Approx(2.0));
  }

  TEST_CASE("matches the recursive oracle on random trajectories") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> len(2, 80);
    std::uniform_real_distribution<double> eps(0.005, 0.3);
    for (int i = 0; i < 300; ++i) {
      const auto n = len(rng);
      auto pts = (i % 2) ? gen::random_walk(rng, n, 0.05) : gen::random_points(rng, n);
      const double e = eps(rng);
      CHECK(rdp_mask(pts, {e}) == oracle::rdp_recursive(pts, e));
    }
  }

  TEST_CASE("mask and id invariants") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::size_t> len(2, 60);
    for (int i = 0; i < 300; ++i) {
      const auto n = len(rng);
      auto pts = gen::random_walk(rng, n, 0.08);
      auto mask = rdp_mask(pts, {0.02});
      CHECK(mask.front() == 1);
      CHECK(mask.back() == 1);
      auto ids = assign_segment_ids(mask);
      REQUIRE(ids.size() == n);
      CHECK(ids.front() == 1);
      for (std::size_t t = 1; t < n; ++t) {
        CHECK(ids[t] >= ids[t - 1]);
        CHECK(ids[t] - ids[t - 1] <= 1);
      }
      CHECK(ids.back() == ids[n - 2]);
      std::uint32_t kept = 0;
      for (auto m : mask) kept += m;
      CHECK(ids.back() == (n == 2 ? 1u : kept - 1));
    }
  }

  TEST_CASE("larger epsilon never keeps more points") {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 100; ++i) {
      auto pts = gen::random_walk(rng, 50, 0.05);
      std::size_t prev = pts.size() + 1;
      for (double e : {0.001, 0.01, 0.03, 0.1, 0.5}) {
        std::size_t kept = 0;
        for (auto m : rdp_mask(pts, {e})) kept += m;
        CHECK(kept <= prev);
        prev = kept;
      }
      std::size_t kept = 0;
      for (auto m : rdp_mask(pts, {100.0})) kept += m;
      CHECK(kept == 2);
    }
  }

  TEST_CASE("dataset segmentation honours units") {
    std::mt19937_64 rng(31);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 5; ++i) trajs.push_back(gen::trajectory(rng, 20 + i, "s" + std::to_string(i)));
    auto scaled = pad_dataset(trajs);
    auto ids = segment_dataset(scaled, {0.02}, 2);
    REQUIRE(ids.size() == 5);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(ids[i] == assign_segment_ids(rdp_mask(trajs[i].states, {0.02})));

    auto meters = trajs;
    for (auto& t : meters) {
      t.units = Units::meters;
      for (auto& s : t.states) s = 1000.0 * s;
    }
    auto md = pad_dataset(meters);
    CHECK_THROWS_AS(segment_dataset(md, {0.02}), std::invalid_argument);
    md.meta().set("r_max_m", "1000");
    CHECK(effective_epsilon(md, 0.02) == doctest::Approx(20.0));
    CHECK(segment_dataset(md, {0.02}) == ids);
  }
}

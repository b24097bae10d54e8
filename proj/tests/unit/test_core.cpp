#include <doctest.h>

#include <cmath>
#include <random>

#include "atscc/core.hpp"
#include "support/oracles.hpp"

using namespace atscc;

namespace {

Trajectory line(std::size_t n, const std::string& id) {
  Trajectory t;
  t.id = id;
  for (std::size_t i = 0; i < n; ++i) t.states.push_back({0.01 * static_cast<double>(i), 0.0, 0.1});
  return t;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("validate_trajectory rules") {
    CHECK(validate_trajectory(line(2, "a")).empty());

    auto t = line(5, "a");
    t.states[2].y = std::nan("");
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(v[0].index == 2);

    auto single = line(1, "a");
    v = validate_trajectory(single);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "T_i < 2");

    auto wide = line(3, "a");
    wide.states[1].x = 1.5;
    CHECK(validate_trajectory(wide).size() == 1);
    wide.units = Units::meters;
    CHECK(validate_trajectory(wide).empty());
  }

  TEST_CASE("pad_dataset shapes") {
    auto d = pad_dataset({line(3, "a"), line(5, "b")});
    CHECK(d.t_max() == 5);
    auto row = d.padded_states(0);
    for (std::size_t t = 3; t < 5; ++t)
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::isnan(row[t * 3 + c]));

    auto one = pad_dataset({line(4, "a")});
    CHECK(one.t_max() == 4);
    for (double x : one.padded_states(0)) CHECK(std::isfinite(x));

    auto uniform = pad_dataset({line(2, "a"), line(2, "b"), line(2, "c")});
    CHECK(uniform.t_max() == 2);
    for (std::size_t i = 0; i < 3; ++i)
      for (double x : uniform.padded_states(i)) CHECK(std::isfinite(x));

    CHECK_THROWS_AS(pad_dataset({}), std::invalid_argument);
    CHECK_THROWS_AS(pad_dataset({line(1, "a")}), std::invalid_argument);
  }

  TEST_CASE("pad then strip round-trips and NaN sits exactly in the padding") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> len(2, 40);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Trajectory> trajs;
      const std::size_t n = 1 + trial % 6;
      for (std::size_t i = 0; i < n; ++i) trajs.push_back(gen::trajectory(rng, len(rng), "f" + std::to_string(i)));
      auto d = pad_dataset(trajs);
      std::size_t longest = 0;
      for (const auto& t : trajs) longest = std::max(longest, t.size());
      CHECK(d.t_max() == longest);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(d.trajectory(i).states == trajs[i].states);
        auto row = d.padded_states(i);
        for (std::size_t t = 0; t < d.t_max(); ++t)
          for (std::size_t c = 0; c < 3; ++c) CHECK(std::isfinite(row[t * 3 + c]) == (t < trajs[i].size()));
      }
    }
  }

  TEST_CASE("segment ids are padded and length-checked") {
    auto d = pad_dataset({line(3, "a"), line(4, "b")});
    d.set_segment_ids({{1, 1, 1}, {1, 2, 2, 2}});
    CHECK(d.segment_ids(1) == SegmentIds{1, 2, 2, 2});
    CHECK(std::isnan(d.padded_segment_ids(0)[3]));
    CHECK_THROWS(d.set_segment_ids({{1, 1}, {1, 2, 2, 2}}));
  }

  TEST_CASE("select keeps order, ids and segment ids") {
    auto d = pad_dataset({line(3, "a"), line(4, "b"), line(2, "c")});
    d.set_segment_ids({{1, 1, 1}, {1, 2, 2, 2}, {1, 1}});
    std::vector<std::size_t> idx{2, 0};
    auto s = d.select(idx);
    CHECK(s.size() == 2);
    CHECK(s.id(0) == "c");
    CHECK(s.id(1) == "a");
    CHECK(s.t_max() == 3);
    CHECK(s.segment_ids(0) == SegmentIds{1, 1});
  }

  TEST_CASE("hash split is deterministic and disjoint") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 200; ++i) trajs.push_back(line(3, "flight" + std::to_string(i)));
    auto d = pad_dataset(trajs);
    auto [tr, te] = split_by_hash(d, 0.3);
    auto [tr2, te2] = split_by_hash(d, 0.3);
    CHECK(tr == tr2);
    CHECK(te == te2);
    CHECK(tr.size() + te.size() == 200);
    CHECK(te.size() > 30);
    CHECK(te.size() < 90);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("parallel_for writes by index and propagates errors") {
    std::vector<int> out(100, 0);
    parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                      if (i == 5) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
  }
}

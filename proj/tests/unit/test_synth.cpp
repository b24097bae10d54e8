#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "atscc/segmentation.hpp"
#include "atscc/synth.hpp"

using namespace atscc;
using namespace atscc::synth;

namespace {

double distance_to_chain(Vec3 p, const std::vector<Vec3>& chain) {
  double best = 1e300;
  for (std::size_t k = 1; k < chain.size(); ++k) {
    const Vec3 a = chain[k - 1], d = chain[k] - a;
    const double u = std::clamp(dot(p - a, d) / dot(d, d), 0.0, 1.0);
    best = std::min(best, norm(p - (a + u * d)));
  }
  return best;
}

GenerateOptions noiseless(std::size_t per_class) {
  GenerateOptions o;
  o.per_class = per_class;
  o.noise_h_m = 0.0;
  o.noise_v_m = 0.0;
  o.entry_jitter_m = 0.0;
  return o;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("procedure chain") {
    const auto sc = default_scenario();
    REQUIRE(sc.procedures.size() == 4);
    const auto chain = sc.procedures[1].chain();
    REQUIRE(chain.size() == 5);
    CHECK(std::hypot(chain[0].x, chain[0].y) == doctest::Approx(24000.0));
    CHECK(chain[4].x == doctest::Approx(750.0));
    CHECK(chain[4].y == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(chain[3].x == doctest::Approx(750.0));
    CHECK(chain[3].y == doctest::Approx(-9000.0));
    CHECK(chain[3].z == 800.0);

    ProcedureSpec bad;
    bad.waypoints = {{0, 0, 0}};
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("noiseless flights lie on the chain") {
    const auto sc = default_scenario();
    auto flights = generate(sc.procedures, noiseless(2));
    REQUIRE(flights.size() == 8);
    for (const auto& f : flights) {
      const auto chain = sc.procedures[static_cast<std::size_t>(*f.label)].chain();
      CHECK(norm(f.states.front() - chain.front()) < 1e-9);
      CHECK(f.units == Units::meters);
      for (const auto& s : f.states) CHECK(distance_to_chain(s, chain) < 1e-6);
      CHECK(norm(f.states.back() - chain.back()) < 140.0 * 1852.0 / 3600.0 + 1e-9);
    }
  }

  TEST_CASE("entry points stay within the jitter disc") {
    const auto sc = default_scenario();
    auto o = noiseless(30);
    o.entry_jitter_m = 1000.0;
    for (const auto& f : generate(sc.procedures, o)) {
      const auto entry = sc.procedures[static_cast<std::size_t>(*f.label)].chain().front();
      CHECK(std::hypot(f.states[0].x - entry.x, f.states[0].y - entry.y) <= 500.0 + 1e-9);
    }
  }

  TEST_CASE("generation is deterministic and labeled") {
    const auto sc = default_scenario();
    GenerateOptions o;
    o.per_class = 3;
    o.seed = 17;
    auto a = generate(sc.procedures, o);
    auto b = generate(sc.procedures, o);
    REQUIRE(a.size() == 12);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].states == b[i].states);
      CHECK(a[i].label == static_cast<int>(i / 3));
      ids.insert(a[i].id);
    }
    CHECK(ids.size() == 12);
    o.seed = 18;
    CHECK(generate(sc.procedures, o)[0].states != a[0].states);
    CHECK_THROWS(generate({sc.procedures[0]}, o));
  }

  TEST_CASE("rdp recovers the procedure turn points") {
    const auto sc = default_scenario();
    auto flights = generate(sc.procedures, noiseless(1));
    for (const auto& f : flights) {
      const auto chain = sc.procedures[static_cast<std::size_t>(*f.label)].chain();
      auto mask = segmentation::rdp_mask(f.states, {50.0});
      for (std::size_t k = 1; k + 1 < chain.size(); ++k) {
        std::size_t nearest = 0;
        for (std::size_t t = 0; t < f.states.size(); ++t)
          if (norm(f.states[t] - chain[k]) < norm(f.states[nearest] - chain[k])) nearest = t;
        bool found = false;
        for (std::size_t t = nearest >= 3 ? nearest - 3 : 0; t <= std::min(nearest + 3, f.states.size() - 1); ++t)
          found = found || mask[t];
        CHECK(found);
      }
    }
  }

  TEST_CASE("train and test datasets") {
    auto sc = default_scenario();
    sc.options.per_class = 5;
    auto [train, test] = make_train_test(sc);
    CHECK(train.size() == 20);
    CHECK(test.size() == 20);
    CHECK(train.units() == Units::scaled);
    CHECK(train.meta().get("r_max_m").has_value());
    std::set<std::string> train_ids;
    for (std::size_t i = 0; i < train.size(); ++i) {
      train_ids.insert(train.id(i));
      CHECK(validate_trajectory(train.trajectory(i)).empty());
      for (std::size_t t = 0; t < train.length(i); ++t) CHECK(std::hypot(train.state(i, t).x, train.state(i, t).y) <= 1.0);
    }
    for (std::size_t i = 0; i < test.size(); ++i) CHECK(train_ids.count(test.id(i)) == 0);
    auto labels = train.labels_or(-1);
    for (int c = 0; c < 4; ++c) CHECK(std::count(labels.begin(), labels.end(), c) == 5);
  }

  TEST_CASE("scenario text round trip") {
    auto sc = default_scenario();
    auto back = parse_scenario(scenario_to_key_values(sc));
    REQUIRE(back.procedures.size() == sc.procedures.size());
    CHECK(back.downsample_s == sc.downsample_s);
    CHECK(back.procedures[2].chain() == sc.procedures[2].chain());
    CHECK_THROWS(parse_scenario({{"bogus", "1"}}));
    CHECK_THROWS(parse_scenario({{"[procedure]", ""}, {"waypoint", "1 2"}}));
  }
}

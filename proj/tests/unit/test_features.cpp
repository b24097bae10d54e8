#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "atscc/features.hpp"
#include "support/oracles.hpp"

using namespace atscc;
using namespace atscc::features;

namespace {

Vec3 rotate_z(Vec3 v, double a) {
  return {std::cos(a) * v.x - std::sin(a) * v.y, std::sin(a) * v.x + std::cos(a) * v.y, v.z};
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("selector parsing") {
    CHECK(FeatureSelector::parse("all").width() == 9);
    auto pos = FeatureSelector::parse("pos");
    CHECK(pos.width() == 3);
    CHECK(pos.name() == "pos");
    CHECK(FeatureSelector::parse("polar+pos").name() == "pos+polar");
    CHECK(FeatureSelector::parse("pos+path+polar").name() == "all");
    CHECK_THROWS(FeatureSelector::parse("speed"));
    CHECK_THROWS(FeatureSelector::parse(""));
  }

  TEST_CASE("path vectors on an L-shaped track") {
    std::vector<Vec3> s{{0, 0, 0}, {2, 0, 0}, {2, 3, 0}, {2, 3, 4}};
    auto p = path_vectors(s);
    REQUIRE(p.size() == 4);
    CHECK(p[0] == Vec3{1, 0, 0});
    CHECK(p[1] == Vec3{0, 1, 0});
    CHECK(p[2] == Vec3{0, 0, 1});
    CHECK(p[3] == p[2]);
  }

  TEST_CASE("zero displacements repeat a neighbouring direction") {
    std::vector<Vec3> s{{0, 0, 0}, {0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 1, 0}};
    auto p = path_vectors(s);
    CHECK(p[0] == Vec3{1, 0, 0});
    CHECK(p[1] == Vec3{1, 0, 0});
    CHECK(p[2] == Vec3{1, 0, 0});
    CHECK(p[3] == Vec3{0, 1, 0});
    CHECK(p[4] == Vec3{0, 1, 0});
    std::vector<Vec3> still(5, Vec3{0.3, 0.1, 0});
    CHECK_THROWS(path_vectors(still));
  }

  TEST_CASE("polar components") {
    std::vector<Vec3> s{{0, 0, 0.5}, {3, 4, 0}, {-1, 0, 0}};
    auto p = polar_components(s);
    CHECK(p[0].r == 0.0);
    CHECK(p[0].sin_theta == 0.0);
    CHECK(p[0].cos_theta == 1.0);
    CHECK(p[1].r == doctest::Approx(5.0));
    CHECK(p[1].sin_theta == doctest::Approx(0.8));
    CHECK(p[1].cos_theta == doctest::Approx(0.6));
    CHECK(p[2].cos_theta == doctest::Approx(-1.0));
  }

  TEST_CASE("assembled layout") {
    Trajectory t{"a", {{0, 0, 0.1}, {0.5, 0, 0.1}, {0.5, 0.5, 0.1}}, std::nullopt, Units::scaled};
    auto f = assemble_features(t, FeatureSelector::all());
    REQUIRE(f.rows == 3);
    REQUIRE(f.cols == 9);
    auto r1 = f.row(1);
    CHECK(r1[0] == 0.5);
    CHECK(r1[2] == 0.1);
    CHECK(r1[4] == doctest::Approx(1.0));
    CHECK(r1[6] == doctest::Approx(0.5));
    CHECK(r1[8] == doctest::Approx(1.0));

    auto pp = assemble_features(t, FeatureSelector::parse("pos+polar"));
    CHECK(pp.cols == 6);
    CHECK(pp.row(1)[3] == doctest::Approx(0.5));
  }

  TEST_CASE("features are finite and directions are unit length") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 200; ++i) {
      auto t = gen::trajectory(rng, 2 + static_cast<std::size_t>(i % 50));
      auto f = assemble_features(t, FeatureSelector::all());
      for (std::size_t r = 0; r < f.rows; ++r) {
        auto row = f.row(r);
        for (double v : row) CHECK(std::isfinite(v));
        CHECK(std::abs(std::hypot(row[3], row[4], row[5]) - 1.0) < 1e-12);
        CHECK(std::abs(row[7] * row[7] + row[8] * row[8] - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("rotation about the vertical axis") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < 100; ++i) {
      auto t = gen::trajectory(rng, 30);
      const double a = ang(rng);
      Trajectory rt = t;
      for (auto& s : rt.states) s = rotate_z(s, a);
      auto f = assemble_features(t, FeatureSelector::all());
      auto g = assemble_features(rt, FeatureSelector::all());
      for (std::size_t r = 0; r < f.rows; ++r) {
        auto fr = f.row(r);
        auto gr = g.row(r);
        Vec3 pv = rotate_z({fr[3], fr[4], fr[5]}, a);
        CHECK(std::abs(pv.x - gr[3]) < 1e-9);
        CHECK(std::abs(pv.y - gr[4]) < 1e-9);
        CHECK(std::abs(pv.z - gr[5]) < 1e-9);
        CHECK(std::abs(fr[6] - gr[6]) < 1e-12);
        if (fr[6] > 1e-9) {
          const double sin_rot = std::sin(a) * fr[8] + std::cos(a) * fr[7];
          const double cos_rot = std::cos(a) * fr[8] - std::sin(a) * fr[7];
          CHECK(std::abs(sin_rot - gr[7]) < 1e-9);
          CHECK(std::abs(cos_rot - gr[8]) < 1e-9);
        }
      }
    }
  }
}

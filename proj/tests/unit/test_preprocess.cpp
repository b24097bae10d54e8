#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "atscc/preprocess.hpp"

using namespace atscc;
using namespace atscc::preprocess;

namespace {

constexpr double kA = 6378137.0;
constexpr double kF = 1.0 / 298.257223563;

TimedTrack track_from(std::vector<double> times, std::vector<Vec3> states) {
  return {"f", std::move(times), std::move(states)};
}

// Straight-in arrival in ENU meters at 1 Hz, converted to raw records.
std::vector<RawRecord> arrival_records(const EnuFrame& frame, const std::string& id, std::size_t n) {
  std::vector<RawRecord> out;
  for (std::size_t t = 0; t < n; ++t) {
    const double s = static_cast<double>(t);
    Vec3 p{-20000.0 + 120.0 * s, -8000.0 + 40.0 * s, 3000.0 - 10.0 * s};
    auto g = enu_to_geodetic(p, frame);
    out.push_back({id, 1000.0 + s, g.lat_deg, g.lon_deg, g.alt_m});
  }
  return out;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("geodetic_to_enu at the reference is the origin") {
    EnuFrame f{37.46, 126.44, 7.0, 120000.0};
    auto p = geodetic_to_enu(Geodetic{37.46, 126.44, 7.0}, f);
    CHECK(std::abs(p.x) < 1e-6);
    CHECK(std::abs(p.y) < 1e-6);
    CHECK(std::abs(p.z) < 1e-6);
  }

  TEST_CASE("geodetic_to_enu matches WGS-84 arc lengths") {
    EnuFrame f{0.0, 0.0, 0.0, 120000.0};
    const double dlon = 0.001 * std::numbers::pi / 180.0;
    auto east = geodetic_to_enu(Geodetic{0.0, 0.001, 0.0}, f);
    CHECK(std::abs(east.x - kA * dlon) < 0.01);
    CHECK(std::abs(east.y) < 0.01);

    // Meridian radius of curvature at the equator: a (1 - e^2).
    const double e2 = kF * (2.0 - kF);
    auto north = geodetic_to_enu(Geodetic{0.001, 0.0, 0.0}, f);
    CHECK(std::abs(north.y - kA * (1.0 - e2) * dlon) < 0.05);
    CHECK(std::abs(north.y - 110.574) < 0.05);
    CHECK(std::abs(east.x - 111.319) < 0.01);
  }

  TEST_CASE("geodetic <-> ENU round trip within 200 km") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lat(-70.0, 70.0), lon(-179.0, 179.0), off(-1.8, 1.8), alt(-100.0, 12000.0);
    for (int i = 0; i < 500; ++i) {
      EnuFrame f{lat(rng), lon(rng), alt(rng) * 0.1, 200000.0};
      Geodetic g{f.ref_lat_deg + off(rng), f.ref_lon_deg + off(rng), alt(rng)};
      auto enu = geodetic_to_enu(g, f);
      if (std::hypot(enu.x, enu.y) > 200000.0) continue;
      auto back = enu_to_geodetic(enu, f);
      CHECK(std::abs(back.lat_deg - g.lat_deg) < 1e-6);
      CHECK(std::abs(back.lon_deg - g.lon_deg) < 1e-6);
      CHECK(std::abs(back.alt_m - g.alt_m) < 1e-3);
    }
    CHECK_THROWS(geodetic_to_enu(Geodetic{91.0, 0.0, 0.0}, EnuFrame{}));
  }

  TEST_CASE("bound_by_radius keeps the inside suffix of an arrival") {
    EnuFrame f{0, 0, 0, 1000.0};
    std::vector<double> t;
    std::vector<Vec3> s;
    for (int i = 0; i < 15; ++i) {
      t.push_back(i);
      s.push_back({i < 7 ? 5000.0 - 100.0 * i : 900.0 - 100.0 * (i - 7), 0.0, 0.0});
    }
    auto out = bound_by_radius(track_from(t, s), f, Direction::arrival);
    CHECK(out.states.size() == 8);
    CHECK(out.times.front() == 7.0);

    auto all_in = bound_by_radius(track_from({0, 1, 2}, {{1, 0, 0}, {2, 0, 0}, {3, 0, 0}}), f, Direction::arrival);
    CHECK(all_in.states.size() == 3);
    CHECK_THROWS(bound_by_radius(track_from({0, 1}, {{5000, 0, 0}, {6000, 0, 0}}), f, Direction::arrival));

    auto dep = bound_by_radius(track_from({0, 1, 2, 3}, {{0, 0, 0}, {500, 0, 0}, {1500, 0, 0}, {900, 0, 0}}), f,
                               Direction::departure);
    CHECK(dep.states.size() == 2);
  }

  TEST_CASE("bound_by_radius agrees with a brute-force scan") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1500.0, 1500.0);
    EnuFrame f{0, 0, 0, 1000.0};
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> t;
      std::vector<Vec3> s;
      for (int i = 0; i < 30; ++i) {
        t.push_back(i);
        s.push_back({u(rng) * (i > 20 ? 0.3 : 1.0), u(rng) * (i > 20 ? 0.3 : 1.0), 0.0});
      }
      std::size_t last_out = 0;
      bool any_out = false;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (std::hypot(s[i].x, s[i].y) > 1000.0) {
          last_out = i;
          any_out = true;
        }
      const std::size_t expect = any_out ? s.size() - last_out - 1 : s.size();
      if (expect < 2) {
        CHECK_THROWS(bound_by_radius(track_from(t, s), f, Direction::arrival));
      } else {
        CHECK(bound_by_radius(track_from(t, s), f, Direction::arrival).states.size() == expect);
      }
    }
  }

  TEST_CASE("resample_1hz grid and values") {
    auto mid = resample_1hz(track_from({0.0, 2.0}, {{0, 0, 0}, {4, 0, 0}}));
    REQUIRE(mid.states.size() == 3);
    CHECK(mid.states[1].x == doctest::Approx(2.0));

    auto grid = resample_1hz(track_from({0.4, 3.6}, {{0, 0, 0}, {1, 0, 0}}));
    CHECK(grid.times == std::vector<double>{1.0, 2.0, 3.0});

    std::vector<Vec3> s{{1, 2, 3}, {4, 5, 6}, {7, 9, 1}};
    auto same = resample_1hz(track_from({5, 6, 7}, s));
    CHECK(same.states == s);

    CHECK_THROWS(resample_1hz(track_from({0.2, 0.9}, {{0, 0, 0}, {1, 0, 0}})));
  }

  TEST_CASE("resample_1hz is exact on affine signals") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coef(-50.0, 50.0), gap(0.1, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
      const double a = coef(rng), b = coef(rng);
      std::vector<double> t{coef(rng)};
      for (int i = 0; i < 40; ++i) t.push_back(t.back() + gap(rng));
      std::vector<Vec3> s;
      for (double ti : t) s.push_back({a * ti + b, -a * ti, b});
      auto out = resample_1hz(track_from(t, s));
      for (std::size_t i = 0; i < out.times.size(); ++i) {
        CHECK(std::abs(out.states[i].x - (a * out.times[i] + b)) < 1e-9);
        CHECK(std::abs(out.states[i].y + a * out.times[i]) < 1e-9);
      }
    }
  }

  TEST_CASE("remove_outliers") {
    std::vector<double> t;
    std::vector<Vec3> s;
    for (int i = 0; i < 30; ++i) {
      t.push_back(i);
      s.push_back({100.0 * i, 50.0 * i, 1000.0 - 5.0 * i});
    }
    auto clean = remove_outliers(track_from(t, s));
    CHECK(clean.states == s);

    auto spiked = s;
    spiked[12].x += 10000.0;
    auto fixed = remove_outliers(track_from(t, spiked));
    REQUIRE(fixed.states.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(fixed.states[i].x == doctest::Approx(s[i].x));
      CHECK(fixed.states[i].z == doctest::Approx(s[i].z));
    }

    auto corrupt = s;
    for (int i = 1; i < 30; i += 3) corrupt[static_cast<std::size_t>(i)].y += 20000.0;
    CHECK_THROWS_WITH(remove_outliers(track_from(t, corrupt)), "trajectory too noisy");
  }

  TEST_CASE("savgol preserves polynomials up to cubic") {
    std::vector<double> constant(40, 3.5), ramp, cubic;
    for (int i = 0; i < 40; ++i) {
      const double x = i;
      ramp.push_back(2.0 * x - 7.0);
      cubic.push_back(0.001 * x * x * x - 0.05 * x * x + 0.3 * x + 2.0);
    }
    for (const auto* sig : {&constant, &ramp, &cubic}) {
      auto out = savgol_smooth(*sig);
      REQUIRE(out.size() == sig->size());
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - (*sig)[i]) < 1e-9);
    }
  }

  TEST_CASE("savgol reduces white noise") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> noise(500);
    for (double& v : noise) v = g(rng);
    auto out = savgol_smooth(noise);
    double before = 0, after = 0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
      before += noise[i] * noise[i];
      after += out[i] * out[i];
    }
    CHECK(after < 0.6 * before);

    std::vector<double> tiny{1.0, 5.0, 2.0};
    CHECK(savgol_smooth(tiny) == tiny);
  }

  TEST_CASE("scale_by_rmax divides once") {
    EnuFrame f{0, 0, 0, 120000.0};
    Trajectory t{"a", {{60000.0, -120000.0, 3000.0}, {0, 0, 0}}, std::nullopt, Units::meters};
    auto s = scale_by_rmax(t, f);
    CHECK(s.states[0] == Vec3{0.5, -1.0, 0.025});
    CHECK(s.states[1] == Vec3{0, 0, 0});
    CHECK(s.units == Units::scaled);
    CHECK_THROWS_AS(scale_by_rmax(s, f), std::logic_error);
  }

  TEST_CASE("downsample stride") {
    Trajectory t{"a", {}, std::nullopt, Units::scaled};
    for (int i = 0; i < 100; ++i) t.states.push_back({0.001 * i, 0, 0});
    auto d = downsample(t, 5);
    CHECK(d.states.size() == 20);
    CHECK(d.states[1] == t.states[5]);
    CHECK(downsample(t, 1).states.size() == 100);
  }

  TEST_CASE("pipeline keeps clean flights and drops short ones") {
    PreprocessConfig cfg;
    cfg.frame = {37.46, 126.44, 0.0, 30000.0};
    cfg.downsample_s = 5;
    auto recs = arrival_records(cfg.frame, "ok", 100);
    recs.push_back({"short", 5.0, 37.46, 126.44, 100.0});
    PipelineReport report;
    auto d = preprocess_pipeline(recs, cfg, &report);
    REQUIRE(d.size() == 1);
    CHECK(d.id(0) == "ok");
    CHECK(d.length(0) == 20);
    CHECK(d.units() == Units::scaled);
    CHECK(validate_trajectory(d.trajectory(0)).empty());
    REQUIRE(report.dropped.size() == 1);
    CHECK(report.dropped[0].flight_id == "short");
    CHECK(d.meta().get("stages").has_value());
  }

  TEST_CASE("pipeline output does not depend on record order or thread count") {
    PreprocessConfig cfg;
    cfg.frame = {37.46, 126.44, 0.0, 30000.0};
    auto recs = arrival_records(cfg.frame, "b", 60);
    auto more = arrival_records(cfg.frame, "a", 80);
    recs.insert(recs.end(), more.begin(), more.end());
    auto d1 = preprocess_pipeline(recs, cfg);
    std::mt19937_64 rng(1);
    std::shuffle(recs.begin(), recs.end(), rng);
    cfg.threads = 3;
    auto d2 = preprocess_pipeline(recs, cfg);
    REQUIRE(d1.size() == 2);
    CHECK(d1.id(0) == "a");
    for (std::size_t i = 0; i < 2; ++i) CHECK(d1.trajectory(i).states == d2.trajectory(i).states);
  }

  TEST_CASE("pipeline config parsing") {
    io::KeyValues kv{{"ref_lat", "37.46"}, {"ref_lon", "126.44"}, {"r_max_m", "120000"}, {"direction", "departure"}};
    auto c = config_from_key_values(kv);
    CHECK(c.frame.r_max_m == 120000.0);
    CHECK(c.direction == Direction::departure);
    CHECK_THROWS(config_from_key_values({{"bogus", "1"}, {"r_max_m", "1"}}));
    CHECK_THROWS(config_from_key_values({{"ref_lat", "1"}}));
  }
}

#include "atscc/preprocess.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

namespace atscc::preprocess {
namespace {

constexpr double kWgs84A = 6378137.0;
constexpr double kWgs84F = 1.0 / 298.257223563;
constexpr double kWgs84E2 = kWgs84F * (2.0 - kWgs84F);
constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 to_ecef(double lat_deg, double lon_deg, double h) {
  const double phi = lat_deg * kDeg;
  const double lam = lon_deg * kDeg;
  const double s = std::sin(phi);
  const double n = kWgs84A / std::sqrt(1.0 - kWgs84E2 * s * s);
  return {(n + h) * std::cos(phi) * std::cos(lam), (n + h) * std::cos(phi) * std::sin(lam),
          (n * (1.0 - kWgs84E2) + h) * s};
}

void check_range(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0)) throw std::invalid_argument("latitude out of range: " + std::to_string(lat));
  if (!(lon >= -180.0 && lon <= 180.0)) throw std::invalid_argument("longitude out of range: " + std::to_string(lon));
}

// Rows are the east, north and up axes expressed in ECEF.
std::array<Vec3, 3> enu_axes(const EnuFrame& frame) {
  const double phi = frame.ref_lat_deg * kDeg;
  const double lam = frame.ref_lon_deg * kDeg;
  const double sp = std::sin(phi), cp = std::cos(phi), sl = std::sin(lam), cl = std::cos(lam);
  return {Vec3{-sl, cl, 0.0}, Vec3{-sp * cl, -sp * sl, cp}, Vec3{cp * cl, cp * sl, sp}};
}

std::vector<Vec3> interpolate(std::span<const double> times, std::span<const Vec3> states,
                              std::span<const double> query) {
  std::vector<Vec3> out;
  out.reserve(query.size());
  std::size_t k = 0;
  for (double q : query) {
    while (k + 2 < times.size() && times[k + 1] < q) ++k;
    const double t0 = times[k], t1 = times[k + 1];
    const double w = (q - t0) / (t1 - t0);
    out.push_back(states[k] + w * (states[k + 1] - states[k]));
  }
  return out;
}

// Hat-matrix rows of the cubic least-squares fit over an 11-sample window.
// Row r gives the weights that evaluate the fit at window position r.
const Eigen::Matrix<double, kSavgolWindow, kSavgolWindow>& savgol_hat() {
  static const auto hat = [] {
    constexpr int half = kSavgolWindow / 2;
    Eigen::Matrix<double, kSavgolWindow, kSavgolOrder + 1> a;
    for (int r = 0; r < static_cast<int>(kSavgolWindow); ++r) {
      for (int c = 0; c <= kSavgolOrder; ++c) a(r, c) = std::pow(static_cast<double>(r - half), c);
    }
    const Eigen::Matrix<double, kSavgolOrder + 1, kSavgolOrder + 1> ata = a.transpose() * a;
    Eigen::Matrix<double, kSavgolWindow, kSavgolWindow> h = a * ata.ldlt().solve(a.transpose());
    return h;
  }();
  return hat;
}

}  // namespace

PreprocessConfig config_from_key_values(const io::KeyValues& kv) {
  PreprocessConfig cfg;
  bool have_rmax = false;
  for (const auto& [key, value] : kv) {
    if (key == "ref_lat") {
      cfg.frame.ref_lat_deg = std::stod(value);
    } else if (key == "ref_lon") {
      cfg.frame.ref_lon_deg = std::stod(value);
    } else if (key == "ref_alt_m") {
      cfg.frame.ref_alt_m = std::stod(value);
    } else if (key == "r_max_m") {
      cfg.frame.r_max_m = std::stod(value);
      have_rmax = true;
    } else if (key == "direction") {
      if (value == "arrival") {
        cfg.direction = Direction::arrival;
      } else if (value == "departure") {
        cfg.direction = Direction::departure;
      } else {
        throw std::invalid_argument("direction must be arrival|departure, got '" + value + "'");
      }
    } else if (key == "downsample_s") {
      cfg.downsample_s = static_cast<unsigned>(std::stoul(value));
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  if (!have_rmax) throw std::invalid_argument("config missing r_max_m");
  if (!(cfg.frame.r_max_m > 0.0)) throw std::invalid_argument("r_max_m must be > 0");
  check_range(cfg.frame.ref_lat_deg, cfg.frame.ref_lon_deg);
  return cfg;
}

Vec3 geodetic_to_enu(const Geodetic& point, const EnuFrame& frame) {
  check_range(point.lat_deg, point.lon_deg);
  const Vec3 d = to_ecef(point.lat_deg, point.lon_deg, point.alt_m) -
                 to_ecef(frame.ref_lat_deg, frame.ref_lon_deg, frame.ref_alt_m);
  const auto axes = enu_axes(frame);
  return {dot(axes[0], d), dot(axes[1], d), dot(axes[2], d)};
}

Vec3 geodetic_to_enu(const RawRecord& record, const EnuFrame& frame) {
  return geodetic_to_enu(Geodetic{record.lat_deg, record.lon_deg, record.baro_alt_m}, frame);
}

Geodetic enu_to_geodetic(Vec3 enu, const EnuFrame& frame) {
  const auto axes = enu_axes(frame);
  const Vec3 ecef = to_ecef(frame.ref_lat_deg, frame.ref_lon_deg, frame.ref_alt_m) +
                    (enu.x * axes[0] + enu.y * axes[1] + enu.z * axes[2]);
  const double p = std::hypot(ecef.x, ecef.y);
  const double lon = std::atan2(ecef.y, ecef.x);
  double lat = std::atan2(ecef.z, p * (1.0 - kWgs84E2));
  double h = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    const double s = std::sin(lat);
    const double n = kWgs84A / std::sqrt(1.0 - kWgs84E2 * s * s);
    h = p / std::cos(lat) - n;
    const double next = std::atan2(ecef.z, p * (1.0 - kWgs84E2 * n / (n + h)));
    const bool done = std::abs(next - lat) < 1e-15;
    lat = next;
    if (done) break;
  }
  return {lat / kDeg, lon / kDeg, h};
}

TimedTrack bound_by_radius(const TimedTrack& track, const EnuFrame& frame, Direction direction) {
  const auto inside = [&](std::size_t t) {
    return std::hypot(track.states[t].x, track.states[t].y) <= frame.r_max_m;
  };
  const std::size_t n = track.states.size();
  std::size_t begin = 0, end = n;
  if (direction == Direction::arrival) {
    begin = n;
    while (begin > 0 && inside(begin - 1)) --begin;
  } else {
    end = 0;
    while (end < n && inside(end)) ++end;
  }
  if (end - begin < 2) throw std::runtime_error("trajectory entirely outside bound");
  TimedTrack out{track.id, {}, {}};
  out.times.assign(track.times.begin() + static_cast<std::ptrdiff_t>(begin),
                   track.times.begin() + static_cast<std::ptrdiff_t>(end));
  out.states.assign(track.states.begin() + static_cast<std::ptrdiff_t>(begin),
                    track.states.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

TimedTrack resample_1hz(const TimedTrack& track) {
  if (track.times.size() < 2 || track.times.back() - track.times.front() < 2.0) {
    throw std::runtime_error("trajectory spans less than 2 seconds");
  }
  for (std::size_t i = 1; i < track.times.size(); ++i) {
    if (!(track.times[i] > track.times[i - 1])) throw std::invalid_argument("timestamps not strictly increasing");
  }
  const double first = std::ceil(track.times.front());
  const double last = std::floor(track.times.back());
  TimedTrack out{track.id, {}, {}};
  for (double t = first; t <= last; t += 1.0) out.times.push_back(t);
  out.states = interpolate(track.times, track.states, out.times);
  return out;
}

TimedTrack remove_outliers(const TimedTrack& track, const OutlierLimits& limits) {
  const std::size_t n = track.states.size();
  const auto too_fast = [&](std::size_t a, std::size_t b) {
    const double dt = std::abs(track.times[b] - track.times[a]);
    const Vec3 d = track.states[b] - track.states[a];
    return std::hypot(d.x, d.y) > limits.max_horizontal_mps * dt ||
           std::abs(d.z) > limits.max_vertical_mps * dt;
  };
  std::vector<bool> outlier(n, false);
  std::size_t flagged = 0;
  for (std::size_t t = 0; t < n; ++t) {
    outlier[t] = (t > 0 && too_fast(t - 1, t)) || (t + 1 < n && too_fast(t, t + 1));
    flagged += outlier[t] ? 1 : 0;
  }
  if (flagged == 0) return track;
  if (static_cast<double>(flagged) > limits.max_fraction * static_cast<double>(n)) {
    throw std::runtime_error("trajectory too noisy");
  }
  std::vector<double> kept_t;
  std::vector<Vec3> kept_s;
  for (std::size_t t = 0; t < n; ++t) {
    if (!outlier[t]) {
      kept_t.push_back(track.times[t]);
      kept_s.push_back(track.states[t]);
    }
  }
  if (kept_t.size() < 2) throw std::runtime_error("trajectory too noisy");
  TimedTrack out{track.id, {}, {}};
  for (double t : track.times) {
    if (t >= kept_t.front() && t <= kept_t.back()) out.times.push_back(t);
  }
  out.states = interpolate(kept_t, kept_s, out.times);
  return out;
}

std::vector<double> savgol_smooth(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n < kSavgolWindow) {
    spdlog::warn("savgol: signal of length {} shorter than window {}, passing through", n, kSavgolWindow);
    return {signal.begin(), signal.end()};
  }
  const auto& hat = savgol_hat();
  constexpr std::size_t half = kSavgolWindow / 2;
  std::vector<double> out(n);
  const auto apply = [&](std::size_t row, std::size_t window_start) {
    double s = 0.0;
    for (std::size_t c = 0; c < kSavgolWindow; ++c) s += hat(static_cast<int>(row), static_cast<int>(c)) * signal[window_start + c];
    return s;
  };
  for (std::size_t t = 0; t < half; ++t) out[t] = apply(t, 0);
  for (std::size_t t = half; t + half < n; ++t) out[t] = apply(half, t - half);
  for (std::size_t t = n - half; t < n; ++t) out[t] = apply(t - (n - kSavgolWindow), n - kSavgolWindow);
  return out;
}

TimedTrack savgol_smooth(const TimedTrack& track) {
  const std::size_t n = track.states.size();
  if (n < kSavgolWindow) {
    spdlog::warn("savgol: flight '{}' has {} states, shorter than window {}; not smoothed", track.id, n,
                 kSavgolWindow);
    return track;
  }
  std::vector<double> x(n), y(n), z(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = track.states[t].x;
    y[t] = track.states[t].y;
    z[t] = track.states[t].z;
  }
  const auto sx = savgol_smooth(x), sy = savgol_smooth(y), sz = savgol_smooth(z);
  TimedTrack out{track.id, track.times, std::vector<Vec3>(n)};
  for (std::size_t t = 0; t < n; ++t) out.states[t] = {sx[t], sy[t], sz[t]};
  return out;
}

Trajectory scale_by_rmax(const Trajectory& traj, const EnuFrame& frame) {
  if (traj.units == Units::scaled) throw std::logic_error("trajectory '" + traj.id + "' is already scaled");
  if (!(frame.r_max_m > 0.0)) throw std::invalid_argument("r_max must be > 0");
  Trajectory out = traj;
  const double inv = 1.0 / frame.r_max_m;
  for (auto& s : out.states) s = {s.x * inv, s.y * inv, s.z * inv};
  out.units = Units::scaled;
  return out;
}

Trajectory downsample(const Trajectory& traj, std::size_t stride) {
  if (stride <= 1) return traj;
  Trajectory out = traj;
  out.states.clear();
  for (std::size_t t = 0; t < traj.states.size(); t += stride) out.states.push_back(traj.states[t]);
  return out;
}

Dataset preprocess_pipeline(std::span<const RawRecord> records, const PreprocessConfig& config,
                            PipelineReport* report) {
  std::map<std::string, std::vector<RawRecord>> flights;
  for (const auto& r : records) flights[r.flight_id].push_back(r);

  std::vector<std::pair<std::string, std::vector<RawRecord>>> work(flights.begin(), flights.end());
  std::vector<std::optional<Trajectory>> results(work.size());
  std::vector<std::string> errors(work.size());

  parallel_for(work.size(), config.threads, [&](std::size_t i) {
    auto& [id, recs] = work[i];
    try {
      std::stable_sort(recs.begin(), recs.end(),
                       [](const RawRecord& a, const RawRecord& b) { return a.timestamp_s < b.timestamp_s; });
      TimedTrack track{id, {}, {}};
      for (const auto& r : recs) {
        if (!track.times.empty() && r.timestamp_s <= track.times.back()) continue;  // duplicate timestamp
        track.times.push_back(r.timestamp_s);
        track.states.push_back(geodetic_to_enu(r, config.frame));
      }
      if (track.states.size() < 2) throw std::runtime_error("fewer than 2 records");
      track = bound_by_radius(track, config.frame, config.direction);
      track = resample_1hz(track);
      track = remove_outliers(track);
      track = savgol_smooth(track);
      Trajectory traj{id, std::move(track.states), std::nullopt, Units::meters};
      traj = scale_by_rmax(traj, config.frame);
      traj = downsample(traj, config.downsample_s);
      if (auto v = validate_trajectory(traj); !v.empty()) throw std::runtime_error(v.front().message());
      results[i] = std::move(traj);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<Trajectory> kept;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (results[i]) {
      kept.push_back(std::move(*results[i]));
    } else {
      spdlog::info("dropped flight '{}': {}", work[i].first, errors[i]);
      if (report != nullptr) report->dropped.push_back({work[i].first, errors[i]});
    }
  }
  if (kept.empty()) throw std::runtime_error("no flights survived preprocessing");

  Dataset data = pad_dataset(kept);
  data.meta().set("stages", "sort,enu,bound,resample_1hz,remove_outliers,savgol,scale,downsample");
  data.meta().set("ref_lat", std::to_string(config.frame.ref_lat_deg));
  data.meta().set("ref_lon", std::to_string(config.frame.ref_lon_deg));
  data.meta().set("ref_alt_m", std::to_string(config.frame.ref_alt_m));
  data.meta().set("r_max_m", std::to_string(config.frame.r_max_m));
  data.meta().set("direction", config.direction == Direction::arrival ? "arrival" : "departure");
  data.meta().set("outlier_limits_mps", "350,60");
  data.meta().set("savgol", "window=11,order=3,edges=polyfit");
  data.meta().set("downsample_s", std::to_string(config.downsample_s));
  return data;
}

}  // namespace atscc::preprocess

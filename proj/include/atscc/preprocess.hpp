#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atscc/core.hpp"
#include "atscc/io.hpp"

namespace atscc::preprocess {

/// Local East-North-Up frame centred on the airport reference point.
/// r_max bounds the terminal area and is the scaling denominator.
struct EnuFrame {
  double ref_lat_deg = 0.0;
  double ref_lon_deg = 0.0;
  double ref_alt_m = 0.0;
  double r_max_m = 1.0;
};

enum class Direction { arrival, departure };

struct PreprocessConfig {
  EnuFrame frame;
  Direction direction = Direction::arrival;
  /// Keep every n-th 1 Hz sample; 0 or 1 disables downsampling.
  unsigned downsample_s = 0;
  unsigned threads = 1;
};

/// Reads ref_lat, ref_lon, ref_alt_m, r_max_m, direction, downsample_s.
PreprocessConfig config_from_key_values(const io::KeyValues& kv);

struct Geodetic {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;
};

/// WGS-84 geodetic -> ECEF -> ENU about the frame reference. The record's
/// barometric altitude is used as ellipsoidal height. Throws on out-of-range
/// latitude or longitude.
Vec3 geodetic_to_enu(const RawRecord& record, const EnuFrame& frame);
Vec3 geodetic_to_enu(const Geodetic& point, const EnuFrame& frame);
/// Inverse transform (iterative latitude solution).
Geodetic enu_to_geodetic(Vec3 enu, const EnuFrame& frame);

/// A trajectory that still carries its timestamps (meters, ENU).
struct TimedTrack {
  std::string id;
  std::vector<double> times;
  std::vector<Vec3> states;
};

/// Keeps the longest contiguous suffix (arrivals) or prefix (departures) whose
/// horizontal range is within r_max. Throws if fewer than 2 states remain.
TimedTrack bound_by_radius(const TimedTrack& track, const EnuFrame& frame, Direction direction);

/// Linear interpolation onto the integer-second grid [ceil(t0), floor(t1)].
TimedTrack resample_1hz(const TimedTrack& track);

struct OutlierLimits {
  double max_horizontal_mps = 350.0;
  double max_vertical_mps = 60.0;
  double max_fraction = 0.2;
};

/// Drops states whose implied speed to either neighbour exceeds the limits
/// and re-interpolates the gaps linearly.
TimedTrack remove_outliers(const TimedTrack& track, const OutlierLimits& limits = {});

inline constexpr std::size_t kSavgolWindow = 11;
inline constexpr int kSavgolOrder = 3;

/// Savitzky-Golay smoothing (window 11, cubic). The first and last half
/// windows are evaluated from the cubic fit over the edge window, so any
/// polynomial of degree <= 3 passes through unchanged. Signals shorter than
/// the window are returned as-is with a warning.
std::vector<double> savgol_smooth(std::span<const double> signal);
TimedTrack savgol_smooth(const TimedTrack& track);

/// Divides every coordinate by r_max. Throws std::logic_error on a
/// trajectory that is already scaled.
Trajectory scale_by_rmax(const Trajectory& traj, const EnuFrame& frame);

/// Keeps states 0, stride, 2*stride, ...
Trajectory downsample(const Trajectory& traj, std::size_t stride);

struct DroppedFlight {
  std::string flight_id;
  std::string reason;
};

struct PipelineReport {
  std::vector<DroppedFlight> dropped;
};

/// Full per-flight chain: sort -> ENU -> bound -> resample -> outliers ->
/// smooth -> scale -> downsample. Failing flights are dropped and reported.
/// Output is ordered by flight id. Throws if no flight survives.
Dataset preprocess_pipeline(std::span<const RawRecord> records, const PreprocessConfig& config,
                            PipelineReport* report = nullptr);

}  // namespace atscc::preprocess

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "atscc/core.hpp"
#include "atscc/io.hpp"

namespace atscc::synth {

/// Local east/north offsets from the airport reference in meters, altitude
/// in meters.
struct Waypoint {
  double x_m = 0.0;
  double y_m = 0.0;
  double alt_m = 0.0;
};

/// One arrival procedure: corridor entry on a circle around the airport,
/// en-route waypoints, then a straight final along the runway's extended
/// centreline ending at the threshold.
struct ProcedureSpec {
  int class_id = 0;
  double entry_bearing_deg = 0.0;
  double entry_radius_m = 24000.0;
  double entry_alt_m = 3000.0;
  std::vector<Waypoint> waypoints;
  double runway_heading_deg = 360.0;
  /// Lateral offset of the runway centreline, positive to the right of the
  /// landing direction.
  double runway_offset_m = 0.0;
  double final_length_m = 9000.0;
  double faf_alt_m = 800.0;
  double threshold_alt_m = 15.0;

  /// Throws std::invalid_argument on fewer than 2 waypoints or bad numbers.
  void validate() const;
  /// Entry, waypoints, final approach fix, threshold.
  std::vector<Vec3> chain() const;
};

struct GenerateOptions {
  std::size_t per_class = 100;
  double noise_h_m = 150.0;
  double noise_v_m = 30.0;
  /// Entry points of one class spread over a disc of this diameter.
  double entry_jitter_m = 1000.0;
  double enroute_kn = 220.0;
  double final_kn = 140.0;
  std::uint64_t seed = 0;
};

/// 1 Hz flights in meters along each procedure's chain, per_class per spec,
/// grouped by spec in input order. Deterministic in (specs, options).
std::vector<Trajectory> generate(const std::vector<ProcedureSpec>& specs, const GenerateOptions& options);

struct Scenario {
  std::vector<ProcedureSpec> procedures;
  GenerateOptions options;
  double r_max_m = 30000.0;
  std::size_t downsample_s = 10;
};

/// Four classes: two corridors (south-west and south-east entries) times a
/// pair of parallel runways 1.5 km apart. Procedures of a pair share every
/// waypoint and differ only in the final segment.
Scenario default_scenario();

/// Top-level `key = value` options followed by `[procedure]` sections; each
/// `waypoint = x y alt` line appends to the current procedure.
Scenario parse_scenario(const io::KeyValues& kv);
Scenario read_scenario(const std::filesystem::path& path);
io::KeyValues scenario_to_key_values(const Scenario& s);

/// Smooths, scales by r_max and downsamples generated flights into a
/// labeled dataset in scaled units.
Dataset prepare(const std::vector<Trajectory>& flights, const Scenario& scenario);

/// Generates 2 x per_class flights per class and splits them alternately
/// into train and test datasets (per_class each per class).
std::pair<Dataset, Dataset> make_train_test(const Scenario& scenario);

}  // namespace atscc::synth

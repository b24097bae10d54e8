#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace atscc {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(Vec3 a, Vec3 b) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline bool is_finite(Vec3 a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// One surveillance report as it arrives in the interchange CSV.
struct RawRecord {
  std::string flight_id;
  double timestamp_s = 0.0;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double baro_alt_m = 0.0;
};

/// Unit system of trajectory coordinates. Scaling by r_max happens exactly
/// once, so the unit travels with the data.
enum class Units : std::uint8_t { meters, scaled };

struct Trajectory {
  std::string id;
  std::vector<Vec3> states;
  std::optional<int> label;
  Units units = Units::scaled;

  std::size_t size() const { return states.size(); }
};

/// Per-timestep significance bits produced by RDP (first and last are 1).
using SignificanceMask = std::vector<std::uint8_t>;
/// Per-timestep segment IDs, starting at 1.
using SegmentIds = std::vector<std::uint32_t>;

struct Violation {
  std::string rule;
  std::size_t index = 0;

  std::string message() const;
};

/// Checks the trajectory invariants. Violations are data; nothing throws.
std::vector<Violation> validate_trajectory(const Trajectory& traj);

/// Ordered key/value metadata carried by the dataset container (pipeline
/// stages, parameters, units).
class Metadata {
 public:
  void set(const std::string& key, std::string value);
  std::optional<std::string> get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// N trajectories stored row-major in one NaN-padded block of
/// N x T_max x 3 values. Validity is defined by the recorded lengths; NaN is
/// only the padding sentinel and is never scanned for.
class Dataset {
 public:
  static constexpr std::size_t kStateDim = 3;

  std::size_t size() const { return ids_.size(); }
  std::size_t t_max() const { return t_max_; }
  std::size_t length(std::size_t i) const { return lengths_.at(i); }
  const std::vector<std::size_t>& lengths() const { return lengths_; }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::optional<int> label(std::size_t i) const { return labels_.at(i); }
  std::vector<int> labels_or(int missing) const;
  Units units() const { return units_; }

  Vec3 state(std::size_t i, std::size_t t) const;
  /// Full padded row block for instance i (T_max x 3 values).
  std::span<const double> padded_states(std::size_t i) const;

  /// Copy of instance i without padding.
  Trajectory trajectory(std::size_t i) const;
  std::vector<Trajectory> trajectories() const;

  bool has_segment_ids() const { return !segment_ids_.empty(); }
  /// Stores per-instance IDs, NaN padded to T_max. Lengths must match.
  void set_segment_ids(const std::vector<SegmentIds>& ids);
  SegmentIds segment_ids(std::size_t i) const;
  /// Padded IDs for instance i (T_max values, NaN beyond the length).
  std::span<const double> padded_segment_ids(std::size_t i) const;

  Metadata& meta() { return meta_; }
  const Metadata& meta() const { return meta_; }

  /// Subset in the given index order; segment IDs and metadata follow.
  Dataset select(std::span<const std::size_t> indices) const;

 private:
  friend Dataset pad_dataset(const std::vector<Trajectory>& trajs);

  std::vector<std::string> ids_;
  std::vector<std::optional<int>> labels_;
  std::vector<std::size_t> lengths_;
  std::size_t t_max_ = 0;
  Units units_ = Units::scaled;
  std::vector<double> states_;
  std::vector<double> segment_ids_;
  Metadata meta_;
};

/// Pads every trajectory with NaN rows to the longest length.
/// Throws std::invalid_argument on an empty list or an invalid trajectory.
Dataset pad_dataset(const std::vector<Trajectory>& trajs);

/// Deterministic train/test split keyed on a 64-bit FNV-1a hash of the
/// flight id. Returns (train indices, test indices) in dataset order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_hash(
    const Dataset& data, double test_fraction);

std::uint64_t fnv1a64(std::string_view text);

/// Keeps freed heap memory mapped instead of returning it to the OS. Training
/// allocates and frees the same large tape buffers every batch; without this
/// each batch pays for fresh page faults. No-op outside glibc.
void retain_heap_memory();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be
/// independent; callers write results by index so output order is fixed.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace atscc

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atscc/core.hpp"

namespace atscc::features {

/// Which feature groups feed the encoder. Groups are always emitted in the
/// fixed order position, path vector, polar.
struct FeatureSelector {
  bool position = true;
  bool path = true;
  bool polar = true;

  static FeatureSelector all() { return {}; }
  /// Accepts "all" or a '+'-joined subset of pos, path, polar.
  static FeatureSelector parse(std::string_view text);
  std::string name() const;
  std::size_t width() const { return 3 * (position + path + polar); }
  bool empty() const { return !position && !path && !polar; }
};

/// Unit forward-difference direction per step; the last step repeats the one
/// before it. A zero displacement repeats the previous direction (or, at the
/// start, the first non-zero one ahead). Throws on a stationary trajectory.
std::vector<Vec3> path_vectors(std::span<const Vec3> states);

struct Polar {
  double r = 0.0;
  double sin_theta = 0.0;
  double cos_theta = 1.0;
};

/// Horizontal range and bearing components about the origin; the angle at
/// the origin itself is taken as 0.
std::vector<Polar> polar_components(std::span<const Vec3> states);

/// Row-major T x F feature matrix.
struct FeatureSeq {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  FeatureSelector selector;

  std::span<const double> row(std::size_t t) const { return {values.data() + t * cols, cols}; }
};

FeatureSeq assemble_features(const Trajectory& traj, FeatureSelector selector);

}  // namespace atscc::features

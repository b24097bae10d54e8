#pragma once

#include <span>
#include <vector>

#include "atscc/core.hpp"

namespace atscc::segmentation {

struct RdpParams {
  /// Allowed perpendicular deviation, in the units of the coordinates.
  double epsilon = 0.01;
};

/// Distance from `point` to the line through seg_start and seg_end, or to
/// seg_start when the two coincide.
double perpendicular_distance(Vec3 point, Vec3 seg_start, Vec3 seg_end);

/// Iterative (explicit-stack) Ramer-Douglas-Peucker over positions. A point is
/// kept when it is the farthest interior point of its current segment and its
/// distance exceeds epsilon; ties go to the lowest index.
/// Throws std::invalid_argument for fewer than 2 points or epsilon <= 0.
SignificanceMask rdp_mask(std::span<const Vec3> points, RdpParams params);

/// Cumulative sum of the mask; the final timestep repeats the previous ID.
SegmentIds assign_segment_ids(const SignificanceMask& mask);

/// Segment IDs for every instance. For datasets still in meters the
/// threshold is epsilon * r_max (r_max read from the dataset metadata).
std::vector<SegmentIds> segment_dataset(const Dataset& data, RdpParams params, unsigned threads = 1);

/// Threshold actually applied to `data` for a scaled-units epsilon.
double effective_epsilon(const Dataset& data, double epsilon);

}  // namespace atscc::segmentation

#include "atscc/segmentation.hpp"

#include <string>
#include <utility>

namespace atscc::segmentation {

double perpendicular_distance(Vec3 point, Vec3 seg_start, Vec3 seg_end) {
  if (seg_start == seg_end) return norm(point - seg_start);
  const Vec3 dir = seg_end - seg_start;
  return norm(cross(dir, seg_start - point)) / norm(dir);
}

SignificanceMask rdp_mask(std::span<const Vec3> points, RdpParams params) {
  if (points.size() < 2) throw std::invalid_argument("rdp_mask needs at least 2 points");
  if (!(params.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");

  SignificanceMask mask(points.size(), 1);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, points.size() - 1}};
  while (!stack.empty()) {
    const auto [s, e] = stack.back();
    stack.pop_back();
    double d_max = 0.0;
    std::size_t split = s;
    for (std::size_t k = s + 1; k < e; ++k) {
      if (!mask[k]) continue;
      const double d = perpendicular_distance(points[k], points[s], points[e]);
      if (d > d_max) {
        split = k;
        d_max = d;
      }
    }
    if (d_max > params.epsilon) {
      stack.emplace_back(s, split);
      stack.emplace_back(split, e);
    } else {
      for (std::size_t k = s + 1; k < e; ++k) mask[k] = 0;
    }
  }
  return mask;
}

SegmentIds assign_segment_ids(const SignificanceMask& mask) {
  SegmentIds ids(mask.size());
  std::uint32_t running = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    running += mask[t];
    ids[t] = running;
  }
  if (ids.size() >= 2) ids.back() = ids[ids.size() - 2];
  return ids;
}

double effective_epsilon(const Dataset& data, double epsilon) {
  if (data.units() == Units::scaled) return epsilon;
  const auto r_max = data.meta().get("r_max_m");
  if (!r_max) throw std::invalid_argument("unscaled dataset without r_max_m metadata");
  return epsilon * std::stod(*r_max);
}

std::vector<SegmentIds> segment_dataset(const Dataset& data, RdpParams params, unsigned threads) {
  params.epsilon = effective_epsilon(data, params.epsilon);
  std::vector<SegmentIds> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const Trajectory traj = data.trajectory(i);
    out[i] = assign_segment_ids(rdp_mask(traj.states, params));
  });
  return out;
}

}  // namespace atscc::segmentation

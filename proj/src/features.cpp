#include "atscc/features.hpp"

#include <cmath>
#include <stdexcept>

namespace atscc::features {

FeatureSelector FeatureSelector::parse(std::string_view text) {
  if (text == "all") return all();
  FeatureSelector sel{false, false, false};
  while (!text.empty()) {
    const auto plus = text.find('+');
    const auto part = text.substr(0, plus);
    if (part == "pos") {
      sel.position = true;
    } else if (part == "path") {
      sel.path = true;
    } else if (part == "polar") {
      sel.polar = true;
    } else {
      throw std::invalid_argument("unknown feature group '" + std::string(part) + "'");
    }
    if (plus == std::string_view::npos) break;
    text.remove_prefix(plus + 1);
  }
  if (sel.empty()) throw std::invalid_argument("empty feature selector");
  return sel;
}

std::string FeatureSelector::name() const {
  if (position && path && polar) return "all";
  std::string out;
  const auto add = [&](bool on, const char* label) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += label;
  };
  add(position, "pos");
  add(path, "path");
  add(polar, "polar");
  return out;
}

std::vector<Vec3> path_vectors(std::span<const Vec3> states) {
  const std::size_t n = states.size();
  if (n < 2) throw std::invalid_argument("path vectors need at least 2 states");
  std::vector<Vec3> out(n);
  std::size_t first_moving = n;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const Vec3 d = states[t + 1] - states[t];
    const double len = norm(d);
    if (len > 0.0) {
      out[t] = (1.0 / len) * d;
      if (first_moving == n) first_moving = t;
    } else if (first_moving != n) {
      out[t] = out[t - 1];
    }
  }
  if (first_moving == n) throw std::invalid_argument("stationary trajectory");
  for (std::size_t t = 0; t < first_moving; ++t) out[t] = out[first_moving];
  out[n - 1] = out[n - 2];
  return out;
}

std::vector<Polar> polar_components(std::span<const Vec3> states) {
  std::vector<Polar> out;
  out.reserve(states.size());
  for (const Vec3& s : states) {
    const double theta = (s.x == 0.0 && s.y == 0.0) ? 0.0 : std::atan2(s.y, s.x);
    out.push_back({std::sqrt(s.x * s.x + s.y * s.y), std::sin(theta), std::cos(theta)});
  }
  return out;
}

FeatureSeq assemble_features(const Trajectory& traj, FeatureSelector selector) {
  if (selector.empty()) throw std::invalid_argument("empty feature selector");
  FeatureSeq seq;
  seq.rows = traj.states.size();
  seq.cols = selector.width();
  seq.selector = selector;
  seq.values.reserve(seq.rows * seq.cols);
  std::vector<Vec3> paths;
  std::vector<Polar> polar;
  if (selector.path) paths = path_vectors(traj.states);
  if (selector.polar) polar = polar_components(traj.states);
  for (std::size_t t = 0; t < seq.rows; ++t) {
    if (selector.position) {
      const Vec3& s = traj.states[t];
      seq.values.insert(seq.values.end(), {s.x, s.y, s.z});
    }
    if (selector.path) seq.values.insert(seq.values.end(), {paths[t].x, paths[t].y, paths[t].z});
    if (selector.polar) seq.values.insert(seq.values.end(), {polar[t].r, polar[t].sin_theta, polar[t].cos_theta});
  }
  return seq;
}

}  // namespace atscc::features

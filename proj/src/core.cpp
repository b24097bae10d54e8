#include "atscc/core.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace atscc {

void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}
namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string Violation::message() const { return rule + " at index " + std::to_string(index); }

std::vector<Violation> validate_trajectory(const Trajectory& traj) {
  std::vector<Violation> out;
  if (traj.states.size() < 2) out.push_back({"T_i < 2", traj.states.size()});
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const Vec3& s = traj.states[t];
    if (!is_finite(s)) {
      out.push_back({"non-finite coordinate", t});
      continue;
    }
    if (traj.units == Units::scaled && (std::abs(s.x) > 1.0 || std::abs(s.y) > 1.0)) {
      out.push_back({"|x| or |y| > 1 after scaling", t});
    }
  }
  return out;
}

void Metadata::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

std::optional<std::string> Metadata::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::vector<int> Dataset::labels_or(int missing) const {
  std::vector<int> out;
  out.reserve(labels_.size());
  for (const auto& l : labels_) out.push_back(l.value_or(missing));
  return out;
}

Vec3 Dataset::state(std::size_t i, std::size_t t) const {
  const double* p = states_.data() + (i * t_max_ + t) * kStateDim;
  return {p[0], p[1], p[2]};
}

std::span<const double> Dataset::padded_states(std::size_t i) const {
  return {states_.data() + i * t_max_ * kStateDim, t_max_ * kStateDim};
}

Trajectory Dataset::trajectory(std::size_t i) const {
  Trajectory traj{ids_.at(i), {}, labels_.at(i), units_};
  traj.states.reserve(lengths_[i]);
  for (std::size_t t = 0; t < lengths_[i]; ++t) traj.states.push_back(state(i, t));
  return traj;
}

std::vector<Trajectory> Dataset::trajectories() const {
  std::vector<Trajectory> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(trajectory(i));
  return out;
}

void Dataset::set_segment_ids(const std::vector<SegmentIds>& ids) {
  if (ids.size() != size()) throw std::invalid_argument("segment id count does not match dataset size");
  std::vector<double> block(size() * t_max_, kNaN);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].size() != lengths_[i]) {
      throw std::invalid_argument("segment ids for '" + ids_[i] + "' have length " +
                                  std::to_string(ids[i].size()) + ", expected " +
                                  std::to_string(lengths_[i]));
    }
    std::copy(ids[i].begin(), ids[i].end(), block.begin() + static_cast<std::ptrdiff_t>(i * t_max_));
  }
  segment_ids_ = std::move(block);
}

SegmentIds Dataset::segment_ids(std::size_t i) const {
  if (!has_segment_ids()) throw std::logic_error("dataset has no segment ids");
  SegmentIds out(lengths_.at(i));
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = static_cast<std::uint32_t>(segment_ids_[i * t_max_ + t]);
  }
  return out;
}

std::span<const double> Dataset::padded_segment_ids(std::size_t i) const {
  if (!has_segment_ids()) throw std::logic_error("dataset has no segment ids");
  return {segment_ids_.data() + i * t_max_, t_max_};
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  std::vector<Trajectory> trajs;
  std::vector<SegmentIds> segs;
  for (std::size_t i : indices) {
    trajs.push_back(trajectory(i));
    if (has_segment_ids()) segs.push_back(segment_ids(i));
  }
  Dataset out = pad_dataset(trajs);
  if (has_segment_ids()) out.set_segment_ids(segs);
  out.meta_ = meta_;
  return out;
}

Dataset pad_dataset(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw std::invalid_argument("empty dataset");
  Dataset d;
  d.units_ = trajs.front().units;
  for (const auto& tr : trajs) {
    if (auto v = validate_trajectory(tr); !v.empty()) {
      throw std::invalid_argument("invalid trajectory '" + tr.id + "': " + v.front().message());
    }
    if (tr.units != d.units_) throw std::invalid_argument("mixed coordinate units in dataset");
    d.t_max_ = std::max(d.t_max_, tr.states.size());
  }
  d.states_.assign(trajs.size() * d.t_max_ * Dataset::kStateDim, kNaN);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& tr = trajs[i];
    d.ids_.push_back(tr.id);
    d.labels_.push_back(tr.label);
    d.lengths_.push_back(tr.states.size());
    double* row = d.states_.data() + i * d.t_max_ * Dataset::kStateDim;
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      row[3 * t] = tr.states[t].x;
      row[3 * t + 1] = tr.states[t].y;
      row[3 * t + 2] = tr.states[t].z;
    }
  }
  return d;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_hash(
    const Dataset& data, double test_fraction) {
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  const auto cut = static_cast<std::uint64_t>(test_fraction * 10000.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (fnv1a64(data.id(i)) % 10000 < cut) {
      out.second.push_back(i);
    } else {
      out.first.push_back(i);
    }
  }
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    const auto workers = std::min<std::size_t>(threads, n);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace atscc

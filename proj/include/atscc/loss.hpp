#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "atscc/core.hpp"
#include "atscc/tensor.hpp"

namespace atscc::loss {

/// modified: negatives of an anchor are rows carrying a different segment
/// ID. rearranged: every other row is a negative.
enum class SnnVariant { modified, rearranged };

SnnVariant parse_variant(std::string_view text);
std::string_view variant_name(SnnVariant v);

/// Flattens per-instance segment IDs in batch order and renumbers them so
/// that IDs from different instances never collide: each instance gets
/// fresh consecutive global IDs starting after the previous instance's.
std::vector<std::uint32_t> remap_ids(std::span<const SegmentIds> batch);

/// Same, from NaN-padded rows with known lengths (padding is skipped).
std::vector<std::uint32_t> remap_ids(std::span<const std::span<const double>> padded,
                                     std::span<const std::size_t> lengths);

/// Segment-level soft nearest-neighbour loss over the rows of z (n x K),
/// built from differentiable tensor ops:
///   -mean_i [ lse_{j != i, id_j = id_i}(z_i.z_j / tau) - lse_{k in neg(i)}(z_i.z_k / tau) ]
/// over anchors that have at least one positive and one negative.
/// Throws std::invalid_argument("degenerate batch") when no anchor qualifies
/// and for tau <= 0.
ad::Tensor snn_loss(const ad::Tensor& z, std::span<const std::uint32_t> ids, double tau,
                    SnnVariant variant = SnnVariant::modified);

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One AdamW update in place: decoupled decay p *= (1 - lr * wd), then the
/// bias-corrected Adam step.
void adamw_step(std::span<double> param, std::span<const double> grad, AdamWState& state, const AdamWConfig& cfg);

class AdamW {
 public:
  AdamW(std::vector<ad::Tensor> params, AdamWConfig cfg);

  void zero_grad();
  void step();
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<AdamWState> state_;
  AdamWConfig cfg_;
};

}  // namespace atscc::loss

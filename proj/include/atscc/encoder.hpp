#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atscc/features.hpp"
#include "atscc/io.hpp"
#include "atscc/tensor.hpp"

namespace atscc::encoder {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t model_dim = 64;
  std::size_t ff_dim = 256;
  std::size_t heads = 4;
  double attn_dropout = 0.35;
  double mask_prob = 0.2;
  std::size_t repr_dim = 32;
  std::size_t input_dim = 9;
  // Ablation switches.
  bool token_l2 = true;
  bool repr_l2 = true;

  /// 2 layers, E = 64, ff 256, 4 heads, K = 32.
  static EncoderConfig desk(std::size_t input_dim = 9);
  /// 12 layers, E = 768, ff 3072, 12 heads, K = 320.
  static EncoderConfig large(std::size_t input_dim = 9);

  /// Throws std::invalid_argument when E is not divisible by heads or a rate
  /// is outside [0, 1).
  void validate() const;

  io::KeyValues to_key_values() const;
  static EncoderConfig from_key_values(const io::KeyValues& kv);
};

enum class Mode { train, eval };

/// Keep bits per timestep (1 = kept). Each valid timestep is dropped
/// independently with probability mask_prob, except the first of every
/// sequence.
std::vector<std::vector<std::uint8_t>> sample_binomial_mask(std::span<const std::size_t> lengths,
                                                            double mask_prob, std::mt19937_64& rng);

/// Additive T x T attention mask for one sequence of `length` valid steps in
/// a batch padded to `t`. Key k is excluded for query q when k > q, k is
/// padding, or k was dropped by random masking.
struct AttentionMask {
  std::size_t t = 0;
  std::vector<double> additive;

  bool excluded(std::size_t q, std::size_t k) const { return additive[q * t + k] != 0.0; }
};

AttentionMask build_attention_mask(std::size_t length, std::size_t t, std::span<const std::uint8_t> keep = {});
std::vector<AttentionMask> build_attention_masks(std::span<const std::size_t> lengths, std::size_t t,
                                                 const std::vector<std::vector<std::uint8_t>>& keep = {});

/// Per-timestep representation vectors of one instance (T x K, row-major).
struct ReprSeq {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t t) const { return {values.data() + t * cols, cols}; }
  std::span<const double> last() const { return row(rows - 1); }
};

/// Causal pre-norm transformer without positional encoding: input
/// projection, token L2 norm, `layers` blocks of masked multi-head
/// self-attention and GELU feed-forward with residuals, final layer norm,
/// output projection, representation L2 norm.
class Encoder {
 public:
  /// Gaussian(0, 0.02) weights, zero biases, unit norm gains.
  Encoder(EncoderConfig config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }

  /// Parameters in deterministic (sorted-by-name) order.
  const std::vector<std::pair<std::string, ad::Tensor>>& named_parameters() const { return params_; }
  std::vector<ad::Tensor> parameters() const;
  ad::Tensor& parameter(const std::string& name);

  /// Encodes a batch into one packed (sum of T_i) x K tensor; rows of
  /// instance i start at the sum of the preceding lengths. In train mode
  /// `rng` drives the timestep and attention-dropout masks and must be set.
  ad::Tensor forward(std::span<const features::FeatureSeq> batch, Mode mode, std::mt19937_64* rng = nullptr) const;

  /// Same as forward() taking an explicit packed input tensor (rows are the
  /// concatenated timesteps). Used for gradient checks against the input.
  ad::Tensor forward_packed(const ad::Tensor& input, std::span<const std::size_t> lengths, Mode mode,
                            std::mt19937_64* rng = nullptr) const;

  /// Eval-mode, no-gradient encoding split back per instance.
  std::vector<ReprSeq> encode(std::span<const features::FeatureSeq> batch) const;

 private:
  struct Block;
  void add_param(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> init);
  const ad::Tensor& p(const std::string& name) const;

  EncoderConfig config_;
  std::vector<std::pair<std::string, ad::Tensor>> params_;
};

std::vector<ReprSeq> split_packed(const ad::Tensor& packed, std::span<const std::size_t> lengths);

inline constexpr char kCheckpointMagic[] = "ATSM";
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Checkpoint: magic, version, config block (key = value text: encoder
/// config plus `extra`), tensor count, then per tensor name, rank, dims and
/// little-endian doubles, in name order.
void save_checkpoint(const std::filesystem::path& path, const Encoder& encoder, const io::KeyValues& extra = {});

struct LoadedCheckpoint {
  Encoder encoder;
  io::KeyValues extra;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace atscc::encoder

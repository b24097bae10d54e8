#include "atscc/encoder.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace atscc::encoder {

using ad::Tensor;

EncoderConfig EncoderConfig::desk(std::size_t input_dim) {
  EncoderConfig c;
  c.input_dim = input_dim;
  return c;
}

EncoderConfig EncoderConfig::large(std::size_t input_dim) {
  EncoderConfig c;
  c.layers = 12;
  c.model_dim = 768;
  c.ff_dim = 3072;
  c.heads = 12;
  c.repr_dim = 320;
  c.input_dim = input_dim;
  return c;
}

void EncoderConfig::validate() const {
  if (layers == 0 || model_dim == 0 || ff_dim == 0 || heads == 0 || repr_dim == 0 || input_dim == 0)
    throw std::invalid_argument("encoder dimensions must be positive");
  if (model_dim % heads != 0)
    throw std::invalid_argument("model_dim " + std::to_string(model_dim) + " not divisible by heads " +
                                std::to_string(heads));
  if (!(attn_dropout >= 0.0 && attn_dropout < 1.0)) throw std::invalid_argument("attn_dropout must be in [0, 1)");
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw std::invalid_argument("mask_prob must be in [0, 1)");
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw std::invalid_argument("bad integer for " + key + ": '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

io::KeyValues EncoderConfig::to_key_values() const {
  return {{"layers", std::to_string(layers)},
          {"model_dim", std::to_string(model_dim)},
          {"ff_dim", std::to_string(ff_dim)},
          {"heads", std::to_string(heads)},
          {"attn_dropout", fmt_double(attn_dropout)},
          {"mask_prob", fmt_double(mask_prob)},
          {"repr_dim", std::to_string(repr_dim)},
          {"input_dim", std::to_string(input_dim)},
          {"token_l2", token_l2 ? "1" : "0"},
          {"repr_l2", repr_l2 ? "1" : "0"}};
}

EncoderConfig EncoderConfig::from_key_values(const io::KeyValues& kv) {
  EncoderConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "layers") c.layers = to_size(k, v);
    else if (k == "model_dim") c.model_dim = to_size(k, v);
    else if (k == "ff_dim") c.ff_dim = to_size(k, v);
    else if (k == "heads") c.heads = to_size(k, v);
    else if (k == "attn_dropout") c.attn_dropout = std::stod(v);
    else if (k == "mask_prob") c.mask_prob = std::stod(v);
    else if (k == "repr_dim") c.repr_dim = to_size(k, v);
    else if (k == "input_dim") c.input_dim = to_size(k, v);
    else if (k == "token_l2") c.token_l2 = to_bool(k, v);
    else if (k == "repr_l2") c.repr_l2 = to_bool(k, v);
  }
  c.validate();
  return c;
}

std::vector<std::vector<std::uint8_t>> sample_binomial_mask(std::span<const std::size_t> lengths,
                                                            double mask_prob, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<std::uint8_t>> keep;
  keep.reserve(lengths.size());
  for (std::size_t len : lengths) {
    std::vector<std::uint8_t> bits(len, 1);
    for (std::size_t t = 1; t < len; ++t) bits[t] = u(rng) < mask_prob ? 0 : 1;
    keep.push_back(std::move(bits));
  }
  return keep;
}

AttentionMask build_attention_mask(std::size_t length, std::size_t t, std::span<const std::uint8_t> keep) {
  if (length > t) throw std::invalid_argument("sequence length exceeds padded length");
  if (!keep.empty() && keep.size() != length) throw std::invalid_argument("keep mask length mismatch");
  AttentionMask m;
  m.t = t;
  m.additive.assign(t * t, 0.0);
  for (std::size_t q = 0; q < t; ++q) {
    for (std::size_t k = 0; k < t; ++k) {
      bool out = k > q || k >= length || (!keep.empty() && !keep[k]);
      // A padded or fully masked query row still needs one open key so the
      // softmax stays defined; its output is never read.
      if (q >= length && k == 0) out = false;
      if (out) m.additive[q * t + k] = ad::kMaskedLogit;
    }
  }
  return m;
}

std::vector<AttentionMask> build_attention_masks(std::span<const std::size_t> lengths, std::size_t t,
                                                 const std::vector<std::vector<std::uint8_t>>& keep) {
  std::vector<AttentionMask> out;
  out.reserve(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i)
    out.push_back(build_attention_mask(lengths[i], t, keep.empty() ? std::span<const std::uint8_t>{}
                                                                    : std::span<const std::uint8_t>(keep[i])));
  return out;
}

Encoder::Encoder(EncoderConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto gaussian = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (double& x : v) x = normal(rng);
    return v;
  };
  const std::size_t e = config_.model_dim;
  const std::size_t f = config_.ff_dim;

  add_param("input.weight", config_.input_dim, e, gaussian(config_.input_dim, e));
  add_param("input.bias", 1, e, std::vector<double>(e, 0.0));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "block" + std::to_string(l) + ".";
    add_param(pre + "ln1.gain", 1, e, std::vector<double>(e, 1.0));
    add_param(pre + "ln1.bias", 1, e, std::vector<double>(e, 0.0));
    add_param(pre + "attn.qkv.weight", e, 3 * e, gaussian(e, 3 * e));
    add_param(pre + "attn.qkv.bias", 1, 3 * e, std::vector<double>(3 * e, 0.0));
    add_param(pre + "attn.out.weight", e, e, gaussian(e, e));
    add_param(pre + "attn.out.bias", 1, e, std::vector<double>(e, 0.0));
    add_param(pre + "ln2.gain", 1, e, std::vector<double>(e, 1.0));
    add_param(pre + "ln2.bias", 1, e, std::vector<double>(e, 0.0));
    add_param(pre + "ff1.weight", e, f, gaussian(e, f));
    add_param(pre + "ff1.bias", 1, f, std::vector<double>(f, 0.0));
    add_param(pre + "ff2.weight", f, e, gaussian(f, e));
    add_param(pre + "ff2.bias", 1, e, std::vector<double>(e, 0.0));
  }
  add_param("final_ln.gain", 1, e, std::vector<double>(e, 1.0));
  add_param("final_ln.bias", 1, e, std::vector<double>(e, 0.0));
  add_param("output.weight", e, config_.repr_dim, gaussian(e, config_.repr_dim));
  add_param("output.bias", 1, config_.repr_dim, std::vector<double>(config_.repr_dim, 0.0));

  std::sort(params_.begin(), params_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

void Encoder::add_param(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> init) {
  params_.emplace_back(name, Tensor::parameter(rows, cols, std::move(init)));
}

std::vector<Tensor> Encoder::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

Tensor& Encoder::parameter(const std::string& name) {
  auto it = std::lower_bound(params_.begin(), params_.end(), name,
                             [](const auto& a, const std::string& n) { return a.first < n; });
  if (it == params_.end() || it->first != name) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const Tensor& Encoder::p(const std::string& name) const { return const_cast<Encoder*>(this)->parameter(name); }

Tensor Encoder::forward(std::span<const features::FeatureSeq> batch, Mode mode, std::mt19937_64* rng) const {
  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  for (const auto& seq : batch) {
    if (seq.cols != config_.input_dim)
      throw std::invalid_argument("feature width " + std::to_string(seq.cols) + " does not match encoder input " +
                                  std::to_string(config_.input_dim));
    if (seq.rows == 0) throw std::invalid_argument("empty sequence");
    lengths.push_back(seq.rows);
    total += seq.rows;
  }
  std::vector<double> packed;
  packed.reserve(total * config_.input_dim);
  for (const auto& seq : batch) packed.insert(packed.end(), seq.values.begin(), seq.values.end());
  return forward_packed(Tensor::constant(total, config_.input_dim, std::move(packed)), lengths, mode, rng);
}

Tensor Encoder::forward_packed(const Tensor& input, std::span<const std::size_t> lengths, Mode mode,
                               std::mt19937_64* rng) const {
  const bool training = mode == Mode::train;
  if (training && rng == nullptr) throw std::invalid_argument("train mode needs a random generator");
  std::size_t total = 0;
  for (std::size_t len : lengths) total += len;
  if (input.rows() != total || input.cols() != config_.input_dim)
    throw std::invalid_argument("packed input shape " + input.shape_string() + " does not match lengths");

  const std::size_t e = config_.model_dim;
  const std::size_t heads = config_.heads;
  const std::size_t d = e / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Tensor x = input;
  std::vector<std::vector<std::uint8_t>> keep;
  if (training && config_.mask_prob > 0.0) {
    keep = sample_binomial_mask(lengths, config_.mask_prob, *rng);
    std::vector<double> row_mask;
    row_mask.reserve(total);
    for (const auto& bits : keep)
      for (std::uint8_t b : bits) row_mask.push_back(b ? 1.0 : 0.0);
    x = ad::dropout_mask_apply(x, Tensor::constant(total, 1, std::move(row_mask)));
  }

  std::vector<Tensor> masks;
  masks.reserve(lengths.size());
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    auto m = build_attention_mask(lengths[s], lengths[s],
                                  keep.empty() ? std::span<const std::uint8_t>{} : std::span<const std::uint8_t>(keep[s]));
    masks.push_back(Tensor::constant(lengths[s], lengths[s], std::move(m.additive)));
  }

  Tensor h = ad::add(ad::matmul(x, p("input.weight")), p("input.bias"));
  if (config_.token_l2) h = ad::l2_normalize(h, 1);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - config_.attn_dropout);

  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string pre = "block" + std::to_string(l) + ".";
    Tensor a = ad::layer_norm(h, p(pre + "ln1.gain"), p(pre + "ln1.bias"));
    Tensor qkv = ad::add(ad::matmul(a, p(pre + "attn.qkv.weight")), p(pre + "attn.qkv.bias"));

    std::vector<Tensor> seq_out;
    seq_out.reserve(lengths.size());
    std::size_t r0 = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
      const std::size_t len = lengths[s];
      std::vector<Tensor> head_out;
      head_out.reserve(heads);
      for (std::size_t hd = 0; hd < heads; ++hd) {
        Tensor q = ad::slice(qkv, r0, r0 + len, hd * d, (hd + 1) * d);
        Tensor k = ad::slice(qkv, r0, r0 + len, e + hd * d, e + (hd + 1) * d);
        Tensor v = ad::slice(qkv, r0, r0 + len, 2 * e + hd * d, 2 * e + (hd + 1) * d);
        Tensor weights = ad::masked_softmax(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d), masks[s]);
        if (training && config_.attn_dropout > 0.0) {
          std::vector<double> drop(len * len);
          for (double& z : drop) z = u(*rng) < config_.attn_dropout ? 0.0 : keep_scale;
          weights = ad::dropout_mask_apply(weights, Tensor::constant(len, len, std::move(drop)));
        }
        head_out.push_back(ad::matmul(weights, v));
      }
      seq_out.push_back(heads == 1 ? head_out.front() : ad::concat(head_out, 1));
      r0 += len;
    }
    Tensor attn = seq_out.size() == 1 ? seq_out.front() : ad::concat(seq_out, 0);
    h = ad::add(h, ad::add(ad::matmul(attn, p(pre + "attn.out.weight")), p(pre + "attn.out.bias")));

    Tensor b = ad::layer_norm(h, p(pre + "ln2.gain"), p(pre + "ln2.bias"));
    Tensor ff = ad::gelu(ad::add(ad::matmul(b, p(pre + "ff1.weight")), p(pre + "ff1.bias")));
    h = ad::add(h, ad::add(ad::matmul(ff, p(pre + "ff2.weight")), p(pre + "ff2.bias")));
  }

  Tensor z = ad::layer_norm(h, p("final_ln.gain"), p("final_ln.bias"));
  z = ad::add(ad::matmul(z, p("output.weight")), p("output.bias"));
  if (config_.repr_l2) z = ad::l2_normalize(z, 1);
  return z;
}

std::vector<ReprSeq> split_packed(const Tensor& packed, std::span<const std::size_t> lengths) {
  std::vector<ReprSeq> out;
  out.reserve(lengths.size());
  auto vals = packed.values();
  const std::size_t k = packed.cols();
  std::size_t r0 = 0;
  for (std::size_t len : lengths) {
    ReprSeq seq;
    seq.rows = len;
    seq.cols = k;
    seq.values.assign(vals.begin() + static_cast<std::ptrdiff_t>(r0 * k),
                      vals.begin() + static_cast<std::ptrdiff_t>((r0 + len) * k));
    out.push_back(std::move(seq));
    r0 += len;
  }
  return out;
}

std::vector<ReprSeq> Encoder::encode(std::span<const features::FeatureSeq> batch) const {
  ad::NoGradGuard guard;
  std::vector<std::size_t> lengths;
  for (const auto& seq : batch) lengths.push_back(seq.rows);
  return split_packed(forward(batch, Mode::eval), lengths);
}

void save_checkpoint(const std::filesystem::path& path, const Encoder& encoder, const io::KeyValues& extra) {
  std::ostringstream text;
  for (const auto& [k, v] : encoder.config().to_key_values()) text << k << " = " << v << "\n";
  for (const auto& [k, v] : extra) text << k << " = " << v << "\n";

  auto out = io::open_output(path);
  io::BinaryWriter w(out);
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u16(kCheckpointVersion);
  w.str(text.str());
  const auto& params = encoder.named_parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.str(name);
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    for (double v : t.values()) w.f64(v);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  io::BinaryReader r(in);
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) throw io::FormatError("not an encoder checkpoint");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw io::FormatError("unsupported checkpoint format version " + std::to_string(version));
  std::istringstream text(r.str());
  io::KeyValues kv = io::parse_key_values(text);

  EncoderConfig config = EncoderConfig::from_key_values(kv);
  const auto config_keys = config.to_key_values();
  io::KeyValues extra;
  for (const auto& entry : kv) {
    bool is_config = std::any_of(config_keys.begin(), config_keys.end(),
                                 [&](const auto& c) { return c.first == entry.first; });
    if (!is_config) extra.push_back(entry);
  }

  Encoder encoder(config, 0);
  const std::uint32_t count = r.u32();
  if (count != encoder.named_parameters().size())
    throw io::FormatError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                          std::to_string(encoder.named_parameters().size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t ndim = r.u32();
    if (ndim != 2) throw io::FormatError("tensor " + name + " has rank " + std::to_string(ndim));
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Tensor* t = nullptr;
    try {
      t = &encoder.parameter(name);
    } catch (const std::out_of_range&) {
      throw io::FormatError("unexpected tensor " + name);
    }
    if (t->rows() != rows || t->cols() != cols)
      throw io::FormatError("shape mismatch for " + name + ": file " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", config " + t->shape_string());
    auto vals = t->mutable_values();
    for (double& v : vals) v = r.f64();
  }
  return {std::move(encoder), std::move(extra)};
}

}  // namespace atscc::encoder

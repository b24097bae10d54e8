#include "atscc/loss.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace atscc::loss {

SnnVariant parse_variant(std::string_view text) {
  if (text == "modified") return SnnVariant::modified;
  if (text == "rearranged") return SnnVariant::rearranged;
  throw std::invalid_argument("unknown loss variant '" + std::string(text) + "' (expected modified or rearranged)");
}

std::string_view variant_name(SnnVariant v) { return v == SnnVariant::modified ? "modified" : "rearranged"; }

std::vector<std::uint32_t> remap_ids(std::span<const SegmentIds> batch) {
  std::vector<std::uint32_t> out;
  std::uint32_t next = 1;
  for (const auto& ids : batch) {
    std::map<std::uint32_t, std::uint32_t> local;
    for (std::uint32_t id : ids) {
      auto [it, inserted] = local.try_emplace(id, next);
      if (inserted) ++next;
      out.push_back(it->second);
    }
  }
  return out;
}

std::vector<std::uint32_t> remap_ids(std::span<const std::span<const double>> padded,
                                     std::span<const std::size_t> lengths) {
  if (padded.size() != lengths.size()) throw std::invalid_argument("remap_ids: lengths do not match batch");
  std::vector<SegmentIds> batch(padded.size());
  for (std::size_t i = 0; i < padded.size(); ++i) {
    if (lengths[i] > padded[i].size()) throw std::invalid_argument("remap_ids: length exceeds padded row");
    for (std::size_t t = 0; t < lengths[i]; ++t) {
      double v = padded[i][t];
      if (!std::isfinite(v) || v < 1.0) throw std::invalid_argument("remap_ids: invalid segment id inside valid span");
      batch[i].push_back(static_cast<std::uint32_t>(v));
    }
  }
  return remap_ids(batch);
}

ad::Tensor snn_loss(const ad::Tensor& z, std::span<const std::uint32_t> ids, double tau, SnnVariant variant) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  const std::size_t n = z.rows();
  if (ids.size() != n) throw std::invalid_argument("snn_loss: ids do not match rows");

  std::vector<double> pos_mask(n * n, ad::kMaskedLogit);
  std::vector<double> neg_mask(n * n, ad::kMaskedLogit);
  std::vector<double> weight(n, 0.0);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool has_pos = false;
    bool has_neg = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (ids[j] == ids[i]) {
        pos_mask[i * n + j] = 0.0;
        has_pos = true;
      }
      if (variant == SnnVariant::rearranged || ids[j] != ids[i]) {
        neg_mask[i * n + j] = 0.0;
        has_neg = true;
      }
    }
    if (has_pos && has_neg) {
      weight[i] = 1.0;
      ++valid;
    }
  }
  if (valid == 0) throw std::invalid_argument("degenerate batch");
  for (double& w : weight) w /= static_cast<double>(valid);

  ad::Tensor sim = ad::matmul(ad::scale(z, 1.0 / tau), ad::transpose(z));
  ad::Tensor lp = ad::log_sum_exp(ad::add(sim, ad::Tensor::constant(n, n, std::move(pos_mask))), 1);
  ad::Tensor ln = ad::log_sum_exp(ad::add(sim, ad::Tensor::constant(n, n, std::move(neg_mask))), 1);
  ad::Tensor w = ad::Tensor::constant(1, n, std::move(weight));
  return ad::scale(ad::matmul(w, ad::sub(lp, ln)), -1.0);
}

void adamw_step(std::span<double> param, std::span<const double> grad, AdamWState& state, const AdamWConfig& cfg) {
  if (param.size() != grad.size()) throw std::invalid_argument("adamw: gradient size mismatch");
  if (state.m.size() != param.size()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] = param[i] * shrink - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

AdamW::AdamW(std::vector<ad::Tensor> params, AdamWConfig cfg)
    : params_(std::move(params)), state_(params_.size()), cfg_(cfg) {}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i)
    adamw_step(params_[i].mutable_values(), params_[i].grad(), state_[i], cfg_);
}

}  // namespace atscc::loss

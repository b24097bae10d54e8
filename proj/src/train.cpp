#include "atscc/train.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "atscc/io.hpp"
#include "atscc/segmentation.hpp"

namespace atscc::train {

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (features.empty()) throw std::invalid_argument("empty feature selector");
}

std::vector<features::FeatureSeq> dataset_features(const Dataset& data, features::FeatureSelector selector) {
  std::vector<features::FeatureSeq> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(features::assemble_features(data.trajectory(i), selector));
  return out;
}

namespace {

// Independent streams for initialisation and the training loop.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

TrainResult train(const Dataset& data, std::span<const SegmentIds> segment_ids, encoder::EncoderConfig enc_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (segment_ids.size() != data.size()) throw std::invalid_argument("segment ids do not match dataset size");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (segment_ids[i].size() != data.length(i))
      throw std::invalid_argument("segment ids of '" + data.id(i) + "' do not match its length");

  enc_config.input_dim = config.features.width();
  TrainResult result{encoder::Encoder(enc_config, derive_seed(config.seed, 1)), {}, 0, false};
  const auto feats = dataset_features(data, config.features);

  loss::AdamW opt(result.encoder.parameters(), {config.lr, config.weight_decay});
  std::mt19937_64 rng(derive_seed(config.seed, 2));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<features::FeatureSeq> batch;
      std::vector<SegmentIds> ids;
      for (std::size_t b = start; b < end; ++b) {
        batch.push_back(feats[order[b]]);
        ids.push_back(segment_ids[order[b]]);
      }
      auto flat = loss::remap_ids(ids);
      opt.zero_grad();
      ad::Tensor z = result.encoder.forward(batch, encoder::Mode::train, &rng);
      ad::Tensor l;
      try {
        l = loss::snn_loss(z, flat, config.tau, config.variant);
      } catch (const std::invalid_argument&) {
        ++result.skipped_batches;
        continue;
      }
      ad::backward(l);
      opt.step();
      sum += l.item();
      ++steps;
    }
    if (steps == 0) throw std::runtime_error("no trainable batch in epoch (every batch degenerate)");
    const double mean = sum / static_cast<double>(steps);
    if (!std::isfinite(mean)) throw std::runtime_error("training diverged: non-finite loss");
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
    if (mean < best) {
      best = mean;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.skipped_batches > 0)
    spdlog::warn("skipped {} degenerate batches (single segment)", result.skipped_batches);
  return result;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> epoch_loss) {
  auto out = io::open_output(path);
  out.precision(17);
  out << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) out << e + 1 << "," << epoch_loss[e] << "\n";
}

eval::Matrix embed(const encoder::Encoder& enc, const Dataset& data, features::FeatureSelector selector) {
  const auto feats = dataset_features(data, selector);
  eval::Matrix out(data.size(), enc.config().repr_dim);
  // Sequences are independent, so encoding in chunks matches one big batch.
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < feats.size(); start += kChunk) {
    const std::size_t end = std::min(feats.size(), start + kChunk);
    auto seqs = enc.encode(std::span(feats).subspan(start, end - start));
    auto reprs = eval::extract_instance_repr(seqs);
    std::copy(reprs.values.begin(), reprs.values.end(), out.row(start).begin());
  }
  return out;
}

Scores score_representations(const eval::Matrix& train_x, std::span<const int> train_y, const eval::Matrix& test_x,
                             std::span<const int> test_y, std::uint64_t seed) {
  Scores s;
  auto model = eval::svm_rbf_fit(train_x, train_y);
  s.acc = eval::accuracy(model.predict(test_x), test_y);
  std::vector<int> classes(test_y.begin(), test_y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  auto km = eval::kmeans(test_x, std::min(classes.size(), test_x.rows), seed);
  s.nmi = eval::nmi(test_y, km.assignments);
  s.ari = eval::ari(test_y, km.assignments);
  return s;
}

GridResult grid_search(const Dataset& train_data, std::span<const double> epsilons, std::span<const double> taus,
                       const encoder::EncoderConfig& enc_config, const TrainConfig& base, double validation_fraction,
                       unsigned threads) {
  if (epsilons.empty() || taus.empty()) throw std::invalid_argument("empty grid");
  auto [fit_idx, val_idx] = split_by_hash(train_data, validation_fraction);
  if (fit_idx.size() < 2 || val_idx.empty()) throw std::invalid_argument("training set too small for a validation split");
  const Dataset fit = train_data.select(fit_idx);
  const Dataset val = train_data.select(val_idx);
  const auto fit_y = fit.labels_or(-1);
  const auto val_y = val.labels_or(-1);

  GridResult result;
  for (double eps : epsilons)
    for (double tau : taus) result.cells.push_back({eps, tau, false, {}, {}});

  parallel_for(result.cells.size(), threads, [&](std::size_t c) {
    GridCell& cell = result.cells[c];
    try {
      auto ids = segmentation::segment_dataset(fit, {segmentation::effective_epsilon(fit, cell.epsilon)});
      bool any_boundary = std::any_of(ids.begin(), ids.end(), [](const SegmentIds& s) { return s.back() > 1; });
      if (!any_boundary) throw std::invalid_argument("epsilon leaves every trajectory as one segment");
      TrainConfig cfg = base;
      cfg.tau = cell.tau;
      auto trained = train(fit, ids, enc_config, cfg);
      cell.scores = score_representations(embed(trained.encoder, fit, cfg.features), fit_y,
                                          embed(trained.encoder, val, cfg.features), val_y, base.seed);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  });

  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const GridCell& cell = result.cells[c];
    if (cell.failed) {
      spdlog::warn("grid cell epsilon={} tau={} failed: {}", cell.epsilon, cell.tau, cell.error);
      continue;
    }
    if (!result.best) {
      result.best = c;
      continue;
    }
    const auto& b = result.cells[*result.best].scores;
    if (cell.scores.acc > b.acc || (cell.scores.acc == b.acc && cell.scores.nmi > b.nmi)) result.best = c;
  }
  return result;
}

}  // namespace atscc::train

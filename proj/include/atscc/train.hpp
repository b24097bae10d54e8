#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atscc/core.hpp"
#include "atscc/encoder.hpp"
#include "atscc/evaluation.hpp"
#include "atscc/features.hpp"
#include "atscc/loss.hpp"

namespace atscc::train {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 200;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double tau = 0.1;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a lower mean loss; 0 disables.
  std::size_t patience = 20;
  loss::SnnVariant variant = loss::SnnVariant::modified;
  features::FeatureSelector features;

  void validate() const;
};

struct TrainResult {
  encoder::Encoder encoder;
  /// Mean batch loss per completed epoch.
  std::vector<double> epoch_loss;
  std::size_t skipped_batches = 0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

std::vector<features::FeatureSeq> dataset_features(const Dataset& data, features::FeatureSelector selector);

/// Trains a fresh encoder (initialised from the seed) on the dataset with
/// the given per-instance segment IDs. Every random draw (initialisation,
/// shuffling, masking, dropout) derives from config.seed, so equal inputs
/// give bit-identical results.
TrainResult train(const Dataset& data, std::span<const SegmentIds> segment_ids, encoder::EncoderConfig enc_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

void write_loss_csv(const std::filesystem::path& path, std::span<const double> epoch_loss);

/// Last-timestep representations of every instance (eval mode).
eval::Matrix embed(const encoder::Encoder& enc, const Dataset& data, features::FeatureSelector selector);

struct Scores {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

/// SVM fitted on the training representations and scored on the test ones;
/// k-means (k = number of test classes) clustering scored against test
/// labels.
Scores score_representations(const eval::Matrix& train_x, std::span<const int> train_y, const eval::Matrix& test_x,
                             std::span<const int> test_y, std::uint64_t seed);

struct GridCell {
  double epsilon = 0.0;
  double tau = 0.0;
  bool failed = false;
  std::string error;
  Scores scores;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::optional<std::size_t> best;
};

/// Trains one encoder per (epsilon, tau) on a hash-split fitting part of the
/// training data and scores it on the held-out validation part. The best
/// cell has the highest accuracy, ties broken by NMI. Cells whose epsilon
/// yields a single segment everywhere, or whose training fails, are marked
/// failed and never chosen.
GridResult grid_search(const Dataset& train_data, std::span<const double> epsilons, std::span<const double> taus,
                       const encoder::EncoderConfig& enc_config, const TrainConfig& base,
                       double validation_fraction = 0.25, unsigned threads = 1);

}  // namespace atscc::train

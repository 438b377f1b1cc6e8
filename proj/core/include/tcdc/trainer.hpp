#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tcdc/datapipe.hpp"
#include "tcdc/net.hpp"
#include "tcdc/optim.hpp"

namespace tcdc {

/// Defaults are the published recipe: batch 32, lr 0.1, momentum 0.9,
/// plateau patience 10, 200 epochs.
struct TrainConfig {
  std::size_t batch = 32;
  double lr = 0.1;
  double momentum = 0.9;
  std::size_t lr_patience = 10;
  std::size_t epochs = 200;
  double lr_factor = 0.1;
  double max_grad_norm = 1.0;  // global L2 clip on each batch gradient; 0 = off
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::size_t workers = 0;  // 0 = hardware concurrency
  double val_fraction = 0.2;
  bool flips = true;
  StreamKind stream = StreamKind::Fused;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

/// Everything needed to resume or reproduce training.
struct NetState {
  Network<float> net;
  std::vector<Tensor> velocity;
  PlateauState scheduler;
  std::size_t epoch = 0;  // epochs completed
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> history;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Seeded shuffle, then the last round(n * val_fraction) indices go to validation.
DataSplit split_dataset(std::size_t n, std::uint64_t seed, double val_fraction);

struct TrainResult {
  NetState best;  // state after the best validation epoch
  NetState last;
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;
  DataSplit split;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Augment -> forward -> backward -> SGD step per batch, validation and
/// plateau update per epoch. Throws EmptyDataset, NumericFailure on NaN loss.
TrainResult train(const NetConfig& net_cfg, const TrainConfig& cfg, const std::vector<PreparedRecord>& dataset,
                  const EpochCallback& on_epoch = {});

struct EvalResult {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  Tensor scores;  // [clips, classes] softmax
  std::vector<std::size_t> predictions;
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Middle clip, center crop, no flip, for every record (or the listed subset).
EvalResult evaluate(const Network<float>& net, const std::vector<PreparedRecord>& dataset, StreamKind stream,
                    std::size_t clip_length, std::size_t workers = 0, const std::vector<std::size_t>* subset = nullptr);

struct ScoreSet {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  Tensor scores;  // [clips, classes]
};

ScoreSet to_score_set(const EvalResult& r);

struct EnsembleResult {
  Tensor scores;
  std::vector<std::size_t> predictions;
  double accuracy = 0.0;
};

/// Mean of softmax scores, argmax decision. Throws OrderMismatch unless all
/// sets list the same clips in the same order with the same class count.
EnsembleResult ensemble(const std::vector<ScoreSet>& sets);

std::vector<std::size_t> argmax_rows(const Tensor& scores);
double accuracy_of(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels);

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::filesystem::path& path);

/// CSV with header id,label,p0..pK-1.
void write_scores_csv(const ScoreSet& set, const std::filesystem::path& path);
ScoreSet read_scores_csv(const std::filesystem::path& path);

}  // namespace tcdc

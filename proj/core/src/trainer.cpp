#include "tcdc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "tcdc/parallel.hpp"

namespace tcdc {

namespace {

struct Batch {
  std::vector<ClipSample> samples;
};

std::size_t resolve_workers(std::size_t requested) { return requested == 0 ? default_workers() : requested; }

bool all_finite(const std::vector<Tensor>& ts) {
  for (const auto& t : ts)
    for (float v : t.data())
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch == 0 || epochs == 0 || lr_patience == 0) fail(ErrorCode::UsageError, "batch, epochs and patience must be positive");
  if (!(lr > 0.0) || !(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::UsageError, "lr must be > 0 and momentum in [0,1)");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) fail(ErrorCode::UsageError, "lr_factor must be in (0,1)");
  if (!(max_grad_norm >= 0.0)) fail(ErrorCode::UsageError, "max_grad_norm must be non-negative");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail(ErrorCode::UsageError, "val_fraction must be in [0,1)");
}

DataSplit split_dataset(std::size_t n, std::uint64_t seed, double val_fraction) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x5b1d));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(n) * val_fraction));
  DataSplit s;
  s.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  s.val.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return s;
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  const std::size_t k = scores.dim(1);
  std::vector<std::size_t> out(scores.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    const float* row = scores.ptr() + r * k;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

double accuracy_of(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels) {
  if (predictions.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

EvalResult evaluate(const Network<float>& net, const std::vector<PreparedRecord>& dataset, StreamKind stream,
                    std::size_t clip_length, std::size_t workers, const std::vector<std::size_t>* subset) {
  std::vector<std::size_t> idx;
  if (subset) {
    idx = *subset;
  } else {
    idx.resize(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  if (idx.empty()) fail(ErrorCode::EmptyDataset, "nothing to evaluate");
  const std::size_t k = net.config().num_classes;
  EvalResult r;
  r.scores = Tensor({idx.size(), k});
  r.labels.resize(idx.size());
  r.ids.resize(idx.size());
  std::vector<double> losses(idx.size());
  const std::size_t size = net.config().input_size;
  parallel_for(idx.size(), resolve_workers(workers), [&](std::size_t i) {
    const auto& rec = dataset.at(idx[i]);
    ClipSample s = make_eval_sample(rec, stream, clip_length, size);
    s.input.reshape({1, s.input.dim(0), s.input.dim(1), s.input.dim(2), s.input.dim(3)});
    const Tensor logits = net.forward(s.input);
    const std::size_t labels[] = {s.label};
    const auto x = softmax_xent(logits, labels);
    std::copy(x.probs.ptr(), x.probs.ptr() + k, r.scores.ptr() + i * k);
    losses[i] = x.loss;
    r.labels[i] = s.label;
    r.ids[i] = rec.id;
  });
  r.predictions = argmax_rows(r.scores);
  r.accuracy = accuracy_of(r.predictions, r.labels);
  r.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  return r;
}

TrainResult train(const NetConfig& net_cfg, const TrainConfig& cfg, const std::vector<PreparedRecord>& dataset,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) fail(ErrorCode::EmptyDataset, "training set is empty");
  if (net_cfg.in_channels != stream_channels(cfg.stream)) {
    fail(ErrorCode::ShapeMismatch, "network input channels do not match the " + std::string(to_string(cfg.stream)) + " stream");
  }
  const std::size_t clip = net_cfg.clip_length;
  const std::size_t size = net_cfg.input_size;

  TrainResult result;
  result.split = split_dataset(dataset.size(), cfg.seed, cfg.val_fraction);
  if (result.split.train.empty()) fail(ErrorCode::EmptyDataset, "no training records after the split");
  const std::vector<std::size_t>& val_idx = result.split.val.empty() ? result.split.train : result.split.val;

  NetState state;
  state.net = Network<float>::build(net_cfg, cfg.seed);
  state.seed = cfg.seed;
  state.scheduler.lr = cfg.lr;
  state.scheduler.patience = cfg.lr_patience;
  state.scheduler.factor = cfg.lr_factor;
  state.scheduler.mode = PlateauMode::Min;

  const std::size_t workers = std::min(resolve_workers(cfg.workers), cfg.batch);
  std::vector<std::vector<Tensor>> worker_grads(workers);
  for (auto& g : worker_grads) g = state.net.zero_grads();

  double best_acc = -1.0, best_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = result.split.train;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xe90c, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_batches = (order.size() + cfg.batch - 1) / cfg.batch;

    // Producer thread assembles augmented batches ahead of the trainer.
    BoundedQueue<Batch> queue(2);
    std::exception_ptr producer_error;
    std::thread producer([&] {
      try {
        for (std::size_t b = 0; b < n_batches; ++b) {
          Batch batch;
          for (std::size_t i = b * cfg.batch; i < std::min(order.size(), (b + 1) * cfg.batch); ++i) {
            const auto& rec = dataset[order[i]];
            const SampleDraw d = draw_training_sample(rec.length(), clip, cfg.seed, epoch, order[i], cfg.flips);
            batch.samples.push_back(make_sample(rec, cfg.stream, clip, d.start, d.aug, size));
          }
          queue.push(std::move(batch));
        }
      } catch (...) {
        producer_error = std::current_exception();
      }
      queue.close();
    });

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    std::exception_ptr trainer_error;
    while (auto batch = queue.pop()) {
      if (trainer_error) continue;
      try {
        const std::size_t n = batch->samples.size();
        const float scale_by = 1.0f / static_cast<float>(n);
        std::vector<double> losses(n);
        std::vector<std::size_t> hits(n);
        for (auto& g : worker_grads)
          for (auto& t : g) t.fill(0.0f);
        auto run = [&](std::size_t i, std::size_t w) {
          const ClipSample& s = batch->samples[i];
          Tensor logits;
          losses[i] = state.net.accumulate_sample(s.input, s.label, scale_by, worker_grads[w], &logits);
          hits[i] = argmax_rows(logits)[0] == s.label;
        };
        if (cfg.deterministic) {
          parallel_chunks(n, workers, [&](std::size_t b, std::size_t e, std::size_t w) {
            for (std::size_t i = b; i < e; ++i) run(i, w);
          });
        } else {
          std::atomic<std::size_t> next{0};
          parallel_chunks(workers, workers, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t w = b; w < e; ++w)
              for (std::size_t i; (i = next.fetch_add(1)) < n;) run(i, w);
          });
        }
        std::vector<Tensor>& total = worker_grads[0];
        for (std::size_t w = 1; w < workers; ++w)
          for (std::size_t p = 0; p < total.size(); ++p) total[p] = add(total[p], worker_grads[w][p]);
        const double batch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
        if (!std::isfinite(batch_loss) || !all_finite(total)) {
          fail(ErrorCode::NumericFailure, "non-finite loss or gradient in epoch " + std::to_string(epoch));
        }
        clip_grad_norm<float>(total, cfg.max_grad_norm);
        auto params = state.net.parameters();
        sgd_momentum_step<float>(params, total, state.velocity, state.scheduler.lr, cfg.momentum);
        loss_sum += batch_loss;
        correct += std::accumulate(hits.begin(), hits.end(), std::size_t{0});
        seen += n;
      } catch (...) {
        trainer_error = std::current_exception();
        queue.close();
      }
    }
    producer.join();
    if (trainer_error) std::rethrow_exception(trainer_error);
    if (producer_error) std::rethrow_exception(producer_error);

    const EvalResult val = evaluate(state.net, dataset, cfg.stream, clip, cfg.workers, &val_idx);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(seen);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    m.val_loss = val.loss;
    m.val_acc = val.accuracy;
    m.lr = state.scheduler.lr;
    if (!std::isfinite(m.val_loss)) fail(ErrorCode::NumericFailure, "non-finite validation loss");
    lr_plateau_update(state.scheduler, m.val_loss);
    state.epoch = epoch + 1;
    state.history.push_back(m);
    result.log.push_back(m);
    if (m.val_acc > best_acc || (m.val_acc == best_acc && m.val_loss < best_loss)) {
      best_acc = m.val_acc;
      best_loss = m.val_loss;
      result.best = state;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(m);
  }
  result.last = std::move(state);
  return result;
}

ScoreSet to_score_set(const EvalResult& r) { return {r.ids, r.labels, r.scores}; }

EnsembleResult ensemble(const std::vector<ScoreSet>& sets) {
  if (sets.empty()) fail(ErrorCode::EmptyDataset, "ensemble of zero score sets");
  const ScoreSet& ref = sets.front();
  if (ref.scores.rank() != 2 || ref.scores.dim(0) != ref.ids.size() || ref.labels.size() != ref.ids.size()) {
    fail(ErrorCode::ShapeMismatch, "score set is inconsistent");
  }
  EnsembleResult r;
  r.scores = Tensor(ref.scores.dims());
  for (const auto& s : sets) {
    if (s.ids != ref.ids || s.labels != ref.labels) fail(ErrorCode::OrderMismatch, "score sets list different clips");
    if (s.scores.dims() != ref.scores.dims()) fail(ErrorCode::OrderMismatch, "score sets differ in clip or class count");
    for (std::size_t i = 0; i < r.scores.size(); ++i) r.scores[i] += s.scores[i];
  }
  const float inv = 1.0f / static_cast<float>(sets.size());
  for (auto& v : r.scores.data()) v *= inv;
  r.predictions = argmax_rows(r.scores);
  r.accuracy = accuracy_of(r.predictions, ref.labels);
  return r;
}

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path.string());
  os << "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
  char buf[256];
  for (const auto& m : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.train_loss, m.train_acc,
                  m.val_loss, m.val_acc, m.lr);
    os << buf;
  }
}

void write_scores_csv(const ScoreSet& set, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot write " + path.string());
  const std::size_t k = set.scores.dim(1);
  os << "id,label";
  for (std::size_t j = 0; j < k; ++j) os << ",p" << j;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    os << set.ids[i] << ',' << set.labels[i];
    for (std::size_t j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(set.scores[i * k + j]));
      os << buf;
    }
    os << '\n';
  }
}

ScoreSet read_scores_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("id,label", 0) != 0) fail(ErrorCode::IoError, "missing score header in " + path.string());
  const auto k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') - 1);
  if (k == 0) fail(ErrorCode::IoError, "no class columns in " + path.string());
  ScoreSet s;
  std::vector<float> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != k + 2) fail(ErrorCode::IoError, "malformed score row '" + line + "'");
    s.ids.push_back(cells[0]);
    s.labels.push_back(std::stoul(cells[1]));
    for (std::size_t j = 0; j < k; ++j) values.push_back(std::stof(cells[2 + j]));
  }
  if (s.ids.empty()) fail(ErrorCode::EmptyDataset, "no scores in " + path.string());
  s.scores = Tensor({s.ids.size(), k}, std::move(values));
  return s;
}

}  // namespace tcdc

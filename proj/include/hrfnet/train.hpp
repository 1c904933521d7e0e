#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hrfnet/config.hpp"
#include "hrfnet/dataset.hpp"
#include "hrfnet/model.hpp"

namespace hrfnet {

// Class-weighted cross-entropy over pixels, normalized by the sum of the
// applied weights: sum_i w(c_i) * -log p_i(c_i) / sum_i w(c_i), with
// w(pristine) = 1 and w(tampered) = tampered_weight.
// logits: N x 2 x H x W (or 2 x H x W); target: N x H x W (or H x W) in {0, 1}.
torch::Tensor weighted_ce(const torch::Tensor& logits, const torch::Tensor& target, double tampered_weight);

// lr0 * decay_factor ^ floor(epoch / decay_every), rounded to 15 significant
// digits so decimal schedules come out exact.
double lr_schedule(int epoch, const TrainConfig& cfg);

// Applies per-run global runtime settings (thread count, deterministic kernels).
void configure_runtime(const TrainConfig& cfg);

struct Batch {
  torch::Tensor images;  // N x 3 x H x W float [0, 255]
  torch::Tensor targets;  // N x H x W int64
};
// hflip[i] mirrors sample i horizontally (augmentation).
Batch collate(const std::vector<const Sample*>& samples, const std::vector<bool>& hflip = {});

class Trainer {
 public:
  Trainer(HRFNet model, TrainConfig cfg);

  HRFNet& model() { return model_; }
  torch::optim::Adam& optimizer() { return optimizer_; }
  const TrainConfig& config() const { return cfg_; }
  int steps() const { return steps_; }

  void set_learning_rate(double lr);
  // One Adam step on the batch; returns the batch loss. Throws
  // ErrorKind::Numeric on a non-finite loss.
  double step(const std::vector<const Sample*>& batch);
  // Shuffled pass over samples in batches of cfg.batch_size at lr_schedule(epoch).
  // Returns the mean batch loss.
  double run_epoch(const std::vector<Sample>& samples, int epoch);

 private:
  HRFNet model_;
  TrainConfig cfg_;
  torch::optim::Adam optimizer_;
  std::mt19937_64 rng_;
  int steps_ = 0;
  int epoch_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  std::string last_checkpoint;
  std::string best_checkpoint;
};

// Columnar history: header "epoch\tlr\ttrain_loss\tval_auc", one row per epoch.
std::string format_history(const std::vector<EpochRecord>& history);

struct TrainLoopOptions {
  std::string out_dir;  // checkpoints + history; empty: keep nothing on disk
  std::function<void(const EpochRecord&)> on_epoch;
};

// Runs cfg.epochs epochs. Checkpoints "last.pt" and "best.pt" (best pooled
// validation AUC; lowest training loss when there is no validation data) and
// "history.tsv" are written to options.out_dir.
TrainResult train_loop(HRFNet model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const TrainConfig& cfg, const TrainLoopOptions& options = {});

TrainResult train_loop(HRFNet model, const DatasetManifest& manifest, const TrainConfig& cfg,
                       const TrainLoopOptions& options = {});

}  // namespace hrfnet

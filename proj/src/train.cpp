#include "hrfnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hrfnet/checkpoint.hpp"
#include "hrfnet/error.hpp"
#include "hrfnet/eval.hpp"

namespace hrfnet {
namespace fs = std::filesystem;

torch::Tensor weighted_ce(const torch::Tensor& logits, const torch::Tensor& target, double tampered_weight) {
  torch::Tensor l = logits.dim() == 3 ? logits.unsqueeze(0) : logits;
  torch::Tensor t = target.dim() == 2 ? target.unsqueeze(0) : target;
  if (l.dim() != 4 || l.size(1) != 2 || t.dim() != 3 || t.size(0) != l.size(0) || t.size(1) != l.size(2) ||
      t.size(2) != l.size(3)) {
    std::ostringstream msg;
    msg << "weighted_ce: logits " << l.sizes() << " do not match target " << t.sizes();
    throw Error(ErrorKind::Shape, msg.str());
  }
  t = t.to(torch::kLong);
  if (t.numel() > 0 && (t.min().item<int64_t>() < 0 || t.max().item<int64_t>() > 1)) {
    throw Error(ErrorKind::Data, "weighted_ce: target values must be 0 or 1");
  }
  if (!(tampered_weight > 0.0)) throw Error(ErrorKind::Config, "weighted_ce: tampered weight must be > 0");

  const auto nll = -torch::log_softmax(l, 1).gather(1, t.unsqueeze(1)).squeeze(1);
  const auto w = 1.0 + (tampered_weight - 1.0) * t.to(l.scalar_type());
  return (w * nll).sum() / w.sum();
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw Error(ErrorKind::Usage, "lr_schedule: negative epoch " + std::to_string(epoch));
  const double raw = cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
  // learning rates are decimal quantities: drop the binary rounding residue
  // (1e-3 * 0.8^3 is 5.120000000000001e-4 in doubles)
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.15g", raw);
  return std::strtod(buf, nullptr);
}

void configure_runtime(const TrainConfig& cfg) {
  at::set_num_threads(cfg.threads);
  at::globalContext().setDeterministicAlgorithms(cfg.deterministic, /*warn_only=*/true);
}

Batch collate(const std::vector<const Sample*>& samples, const std::vector<bool>& hflip) {
  std::vector<torch::Tensor> images, targets;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto img = image_to_tensor(samples[i]->image);
    auto tgt = mask_to_tensor(samples[i]->mask);
    if (i < hflip.size() && hflip[i]) {
      img = img.flip({3});
      tgt = tgt.flip({2});
    }
    images.push_back(img);
    targets.push_back(tgt);
  }
  return {torch::cat(images, 0), torch::cat(targets, 0)};
}

// ---------------------------------------------------------------------------

Trainer::Trainer(HRFNet model, TrainConfig cfg)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      optimizer_(model_->parameters(),
                 torch::optim::AdamOptions(cfg_.lr0).betas({0.9, 0.999}).eps(1e-8).weight_decay(0.0)),
      rng_(cfg_.seed) {
  cfg_.validate();
}

void Trainer::set_learning_rate(double lr) {
  for (auto& group : optimizer_.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

double Trainer::step(const std::vector<const Sample*>& batch) {
  std::vector<bool> flips;
  if (cfg_.augment_flips) {
    for (std::size_t i = 0; i < batch.size(); ++i) flips.push_back(std::bernoulli_distribution(0.5)(rng_));
  }
  const Batch b = collate(batch, flips);
  model_->train();
  optimizer_.zero_grad();
  auto loss = weighted_ce(model_->forward(b.images), b.targets, cfg_.tampered_weight);
  const double value = loss.item<double>();
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::Numeric, "non-finite training loss (" + std::to_string(value) + ") at epoch " +
                                        std::to_string(epoch_) + ", step " + std::to_string(steps_ + 1));
  }
  loss.backward();
  optimizer_.step();
  ++steps_;
  return value;
}

double Trainer::run_epoch(const std::vector<Sample>& samples, int epoch) {
  if (samples.empty()) throw Error(ErrorKind::Data, "training split is empty");
  epoch_ = epoch;
  set_learning_rate(lr_schedule(epoch, cfg_));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  double total = 0.0;
  int batches = 0;
  for (std::size_t i = 0; i < order.size(); i += cfg_.batch_size) {
    std::vector<const Sample*> batch;
    for (std::size_t k = i; k < std::min(order.size(), i + cfg_.batch_size); ++k) batch.push_back(&samples[order[k]]);
    total += step(batch);
    ++batches;
  }
  return total / batches;
}

// ---------------------------------------------------------------------------

std::string format_history(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch\tlr\ttrain_loss\tval_auc\n";
  out.precision(10);
  for (const auto& r : history) {
    out << r.epoch << '\t' << r.lr << '\t' << r.train_loss << '\t';
    if (std::isnan(r.val_auc)) out << "nan";
    else out << r.val_auc;
    out << '\n';
  }
  return out.str();
}

TrainResult train_loop(HRFNet model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const TrainConfig& cfg, const TrainLoopOptions& options) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorKind::Data, "training split is empty");
  const ModelConfig& mc = model->config();
  for (const auto* split : {&train, &val}) {
    for (const auto& s : *split) check_resolution(mc, s.image.height(), s.image.width());
  }
  configure_runtime(cfg);

  Trainer trainer(model, cfg);
  TrainResult result;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    result.last_checkpoint = (fs::path(options.out_dir) / "last.pt").string();
    result.best_checkpoint = (fs::path(options.out_dir) / "best.pt").string();
  }

  double best_score = -std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_schedule(epoch, cfg);
    rec.train_loss = trainer.run_epoch(train, epoch);
    if (!val.empty()) rec.val_auc = evaluate(model, val, {AucMode::Pooled, false}).auc;
    result.history.push_back(rec);

    const double score = val.empty() ? -rec.train_loss : rec.val_auc;
    const bool improved = score > best_score;
    if (improved) {
      best_score = score;
      result.best_epoch = epoch;
      result.best_val_auc = rec.val_auc;
    }
    if (!options.out_dir.empty()) {
      save_checkpoint(result.last_checkpoint, model, epoch + 1, &trainer.optimizer());
      if (improved) save_checkpoint(result.best_checkpoint, model, epoch + 1, &trainer.optimizer());
      std::ofstream(fs::path(options.out_dir) / "history.tsv") << format_history(result.history);
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

TrainResult train_loop(HRFNet model, const DatasetManifest& manifest, const TrainConfig& cfg,
                       const TrainLoopOptions& options) {
  const auto train = load_samples(manifest, Split::Train);
  const auto val = load_samples(manifest, Split::Val);
  return train_loop(std::move(model), train, val, cfg, options);
}

}  // namespace hrfnet

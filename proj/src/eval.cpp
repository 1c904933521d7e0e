#include "hrfnet/eval.hpp"

#include <chrono>
#include <nlohmann/json.hpp>

#include "hrfnet/error.hpp"

namespace hrfnet {

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["auc"] = auc;
  j["auc_mode"] = to_string(mode);
  j["n_images"] = n_images;
  if (mode == AucMode::PerImageMean) {
    j["per_image_auc"] = per_image_auc;
    j["excluded_single_class"] = excluded_single_class;
  }
  if (f1) j["f1@0.5"] = *f1;
  if (iou) j["iou@0.5"] = *iou;
  j["fps"] = fps;
  j["memory_mb"] = memory_mb ? nlohmann::json(*memory_mb) : nlohmann::json("unavailable");
  if (!memory_mode.empty()) j["memory_mode"] = memory_mode;
  return j.dump(2) + "\n";
}

void check_resolution(const ModelConfig& cfg, int height, int width) {
  auto round32 = [](int v) { return (v + 31) / 32 * 32; };
  if (round32(height) != cfg.full_res.height || round32(width) != cfg.full_res.width) {
    throw Error(ErrorKind::Config, "data resolution " + std::to_string(height) + "x" + std::to_string(width) +
                                       " does not fit model resolution " + format_extent(cfg.full_res));
  }
}

std::vector<ProbabilityMap> predict_all(HRFNet& model, const std::vector<Sample>& samples) {
  std::vector<ProbabilityMap> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(predict_mask(model, s.image).probability);
  return out;
}

MetricsReport evaluate_with(const Predictor& predict, const std::vector<Sample>& samples, const EvalOptions& opts) {
  if (samples.empty()) throw Error(ErrorKind::Data, "evaluation split is empty");
  std::vector<ProbabilityMap> scores;
  std::vector<Mask> targets;
  scores.reserve(samples.size());
  targets.reserve(samples.size());

  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& s : samples) {
    scores.push_back(predict(s.image));
    if (!scores.back().same_extent(s.mask)) {
      throw Error(ErrorKind::Shape, "prediction for '" + s.id + "' does not match its mask dims");
    }
    targets.push_back(s.mask);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  MetricsReport report;
  report.mode = opts.mode;
  report.n_images = static_cast<int>(samples.size());
  report.fps = secs > 0.0 ? samples.size() / secs : 0.0;
  const AucResult auc = pixel_auc(scores, targets, opts.mode);
  report.auc = auc.auc;
  report.per_image_auc = auc.per_image;
  report.excluded_single_class = auc.excluded_single_class;

  if (opts.threshold_metrics) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto sv = scores[i].values();
      const auto tv = targets[i].values();
      for (std::size_t k = 0; k < sv.size(); ++k) {
        const bool pred = sv[k] >= opts.threshold;
        const bool gt = tv[k] != 0;
        tp += pred && gt;
        fp += pred && !gt;
        fn += !pred && gt;
      }
    }
    report.f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    report.iou = (tp + fp + fn) > 0 ? tp / (tp + fp + fn) : 0.0;
  }
  return report;
}

MetricsReport evaluate(HRFNet& model, const std::vector<Sample>& samples, const EvalOptions& opts) {
  for (const auto& s : samples) check_resolution(model->config(), s.image.height(), s.image.width());
  return evaluate_with([&](const Image& img) { return predict_mask(model, img, opts.threshold).probability; }, samples,
                  opts);
}

}  // namespace hrfnet

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hrfnet/auc.hpp"
#include "hrfnet/dataset.hpp"
#include "hrfnet/model.hpp"

namespace hrfnet {

struct MetricsReport {
  double auc = 0.0;
  AucMode mode = AucMode::Pooled;
  std::vector<double> per_image_auc;
  int n_images = 0;
  int excluded_single_class = 0;
  std::optional<double> f1;   // at threshold 0.5, pooled over pixels
  std::optional<double> iou;
  double fps = 0.0;
  std::optional<double> memory_mb;
  std::string memory_mode;

  std::string to_json() const;
};

using Predictor = std::function<ProbabilityMap(const Image&)>;

struct EvalOptions {
  AucMode mode = AucMode::Pooled;
  bool threshold_metrics = true;
  double threshold = 0.5;
};

// Batch-1 inference over samples in order, then AUC and thresholded metrics.
MetricsReport evaluate_with(const Predictor& predict, const std::vector<Sample>& samples, const EvalOptions& opts = {});
MetricsReport evaluate(HRFNet& model, const std::vector<Sample>& samples, const EvalOptions& opts = {});

// Probability maps of the tampered class for every sample (eval mode, no grad).
std::vector<ProbabilityMap> predict_all(HRFNet& model, const std::vector<Sample>& samples);

// Throws ErrorKind::Config when the data resolution does not fit the model.
void check_resolution(const ModelConfig& cfg, int height, int width);

}  // namespace hrfnet

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hrfnet/error.hpp"
#include "hrfnet/raster.hpp"

namespace hrfnet {

enum class AucMode { Pooled, PerImageMean };

inline std::string to_string(AucMode m) { return m == AucMode::Pooled ? "pooled" : "per_image_mean"; }
inline AucMode parse_auc_mode(const std::string& s) {
  if (s == "pooled") return AucMode::Pooled;
  if (s == "per_image_mean" || s == "per-image") return AucMode::PerImageMean;
  throw Error(ErrorKind::Config, "unknown AUC mode '" + s + "'");
}

// Area under the ROC curve by the Mann-Whitney rank statistic with midranks
// for ties: (R+ - P(P+1)/2) / (P N). Labels are {0, 1}; nonzero is positive.
// Throws ErrorKind::Numeric when either class is absent.
template <typename Score>
double roc_auc(std::span<const Score> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::Shape, "roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                                      std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] < scores[b]; });

  double positives = 0.0;
  double rank_sum = 0.0;  // half-integers: exact in double well beyond any image set
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && !(scores[order[i]] < scores[order[j]])) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positives += 1.0;
        rank_sum += midrank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw Error(ErrorKind::Numeric, "AUC undefined: need at least one positive and one negative pixel");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

struct AucResult {
  double auc = 0.0;
  std::vector<double> per_image;  // filled in per-image mode
  int excluded_single_class = 0;
};

// Pixel AUC over paired probability maps and masks.
inline AucResult pixel_auc(std::span<const ProbabilityMap> scores, std::span<const Mask> targets,
                           AucMode mode = AucMode::Pooled) {
  if (scores.size() != targets.size()) throw Error(ErrorKind::Shape, "pixel_auc: unpaired score/target lists");
  if (scores.empty()) throw Error(ErrorKind::Usage, "pixel_auc: no images");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i].same_extent(targets[i]) || scores[i].channels() != 1 || targets[i].channels() != 1) {
      throw Error(ErrorKind::Shape, "pixel_auc: image " + std::to_string(i) + " score/target dims differ");
    }
  }

  AucResult result;
  if (mode == AucMode::Pooled) {
    std::vector<float> s;
    std::vector<std::uint8_t> l;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s.insert(s.end(), scores[i].values().begin(), scores[i].values().end());
      l.insert(l.end(), targets[i].values().begin(), targets[i].values().end());
    }
    result.auc = roc_auc<float>(s, l);
    return result;
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto lv = targets[i].values();
    const auto pos = std::count_if(lv.begin(), lv.end(), [](std::uint8_t v) { return v != 0; });
    if (pos == 0 || static_cast<std::size_t>(pos) == lv.size()) {
      ++result.excluded_single_class;
      continue;
    }
    const double a = roc_auc<float>(scores[i].values(), lv);
    result.per_image.push_back(a);
    sum += a;
  }
  if (result.per_image.empty()) {
    throw Error(ErrorKind::Numeric, "AUC undefined: every image has a single-class ground truth");
  }
  result.auc = sum / static_cast<double>(result.per_image.size());
  return result;
}

}  // namespace hrfnet

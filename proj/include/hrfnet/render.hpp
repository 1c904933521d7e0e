#pragma once

#include <string>
#include <vector>

#include "hrfnet/raster.hpp"

namespace hrfnet {

struct NamedPrediction {
  std::string name;
  ProbabilityMap map;  // binary masks are passed as 0 / 1 maps
};

struct ComparisonSample {
  Image image;
  Mask ground_truth;
  std::vector<NamedPrediction> predictions;
};

struct RenderOptions {
  Extent tile{0, 0};  // 0 x 0: the samples' own resolution
  int margin = 8;
  int title_height = 28;
};

// Canvas size for a rows x cols grid of tiles.
Extent comparison_extent(int rows, int cols, Extent tile, const RenderOptions& opts);

ProbabilityMap mask_as_probability(const Mask& mask);

// One row per sample: input | ground truth | one column per prediction, with
// a title band. Tiles are placed with nearest-neighbour sampling on a white
// canvas; maps render as grey levels (0 black, 1 white).
Image render_comparison(const std::vector<ComparisonSample>& samples, const RenderOptions& opts = {});

}  // namespace hrfnet

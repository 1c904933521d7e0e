#pragma once

#include <vector>

#include "hrfnet/manifest.hpp"
#include "hrfnet/raster.hpp"

namespace hrfnet {

struct Sample {
  std::string id;
  Image image;
  Mask mask;
};

// Loads every pair of a split, checking that each image and mask share dims
// equal to the manifest size.
std::vector<Sample> load_samples(const DatasetManifest& manifest, Split split);

}  // namespace hrfnet

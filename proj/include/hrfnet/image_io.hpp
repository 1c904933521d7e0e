#pragma once

#include <string>

#include "hrfnet/raster.hpp"

namespace hrfnet {

// Any format OpenCV decodes; always returned as 8-bit RGB.
Image read_image(const std::string& path);
// Lossless PNG; channels 1 or 3 (RGB order).
void write_image(const std::string& path, const Image& image);

// Masks are stored as 0/255 PNG; reading maps every nonzero value to 1.
Mask read_mask(const std::string& path);
void write_mask(const std::string& path, const Mask& mask);

// Probabilities quantized to 8-bit grey (p * 255, rounded).
void write_probability(const std::string& path, const ProbabilityMap& prob);

}  // namespace hrfnet

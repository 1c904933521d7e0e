#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hrfnet/error.hpp"
#include "hrfnet/raster.hpp"

namespace hrfnet {

// One fixed high-pass kernel. Coefficients are stored as integers scaled by
// `divisor`, row-major, `side` x `side`.
struct SrmKernel {
  std::string name;
  int side = 0;
  std::vector<double> coefficients;
  double divisor = 1.0;

  int radius() const noexcept { return side / 2; }
  double weight(int row, int col) const noexcept { return coefficients[row * side + col] / divisor; }
};

struct FilterBank {
  std::vector<SrmKernel> kernels;
  double truncation_threshold = 2.0;

  int max_side() const noexcept;
  // Throws ErrorKind::Config when any invariant (zero-sum, odd square, T > 0) is violated.
  void validate() const;

  std::string to_json() const;
  static FilterBank from_json(const std::string& text);
};

// The fixed three-kernel bank: 5x5 "KV", 3x3 second-order, third-order edge residual.
FilterBank srm_kernels();

struct SrmOptions {
  // true: every kernel on every RGB channel (K = 3 * kernels).
  // false: kernels on the luminance plane only (K = kernels).
  bool per_channel = true;
};

inline int srm_output_channels(const FilterBank& bank, const SrmOptions& opts = {}) {
  return static_cast<int>(bank.kernels.size()) * (opts.per_channel ? 3 : 1);
}

// Slides every kernel over every input plane (cross-correlation, the CNN
// convention; reflect borders), divides by the kernel divisor and clamps to +-threshold. Output
// channel order is kernel-major: channel = kernel * planes + plane.
template <typename T>
ResidualImage apply_srm(const Raster<T>& image, const FilterBank& bank, const SrmOptions& opts = {}) {
  if (image.channels() != 3) {
    throw Error(ErrorKind::Channels,
                "apply_srm: expected 3 channels, got " + std::to_string(image.channels()));
  }
  const int side = bank.max_side();
  if (image.height() < side || image.width() < side) {
    throw Error(ErrorKind::Shape, "apply_srm: image " + std::to_string(image.height()) + "x" +
                                      std::to_string(image.width()) + " smaller than kernel side " +
                                      std::to_string(side));
  }

  const int h = image.height();
  const int w = image.width();
  const int planes = opts.per_channel ? 3 : 1;
  const int nk = static_cast<int>(bank.kernels.size());

  // planar double copy of the inputs
  std::vector<std::vector<double>> input(planes, std::vector<double>(static_cast<std::size_t>(h) * w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (opts.per_channel) {
        for (int c = 0; c < 3; ++c) input[c][i] = static_cast<double>(image.at(y, x, c));
      } else {
        input[0][i] = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
      }
    }
  }

  const double t = bank.truncation_threshold;
  ResidualImage out(h, w, nk * planes);
  for (int k = 0; k < nk; ++k) {
    const SrmKernel& kern = bank.kernels[k];
    const int r = kern.radius();
    for (int p = 0; p < planes; ++p) {
      const auto& src = input[p];
      const int oc = k * planes + p;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int i = 0; i < kern.side; ++i) {
            const int sy = reflect_index(y + i - r, h);
            for (int j = 0; j < kern.side; ++j) {
              const double c = kern.coefficients[i * kern.side + j];
              if (c == 0.0) continue;
              acc += c * src[static_cast<std::size_t>(sy) * w + reflect_index(x + j - r, w)];
            }
          }
          out.at(y, x, oc) = static_cast<float>(std::clamp(acc / kern.divisor, -t, t));
        }
      }
    }
  }
  return out;
}

// Bilinear resize without corner alignment (pixel centres at i + 0.5). Only
// reduces: target dims must be >= 1 and <= the source dims.
template <typename T>
Raster<float> downsample(const Raster<T>& src, Extent target) {
  if (target.height < 1 || target.width < 1) {
    throw Error(ErrorKind::Shape, "downsample: target dims must be >= 1");
  }
  if (target.height > src.height() || target.width > src.width()) {
    throw Error(ErrorKind::Shape, "downsample: target " + std::to_string(target.height) + "x" +
                                      std::to_string(target.width) + " exceeds source " +
                                      std::to_string(src.height()) + "x" + std::to_string(src.width()));
  }
  const int ch = src.channels();
  Raster<float> out(target.height, target.width, ch);

  auto axis = [](int dst, int in_size, int out_size, int& i0, int& i1, double& frac) {
    const double scale = static_cast<double>(in_size) / out_size;
    double s = (dst + 0.5) * scale - 0.5;
    if (s < 0.0) s = 0.0;
    i0 = std::min(static_cast<int>(s), in_size - 1);
    i1 = std::min(i0 + 1, in_size - 1);
    frac = s - i0;
  };

  for (int y = 0; y < target.height; ++y) {
    int y0, y1;
    double fy;
    axis(y, src.height(), target.height, y0, y1, fy);
    for (int x = 0; x < target.width; ++x) {
      int x0, x1;
      double fx;
      axis(x, src.width(), target.width, x0, x1, fx);
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c);
        const double bot = (1.0 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

}  // namespace hrfnet

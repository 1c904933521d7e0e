#include "hrfnet/render.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgproc.hpp>

#include "hrfnet/error.hpp"

namespace hrfnet {

Extent comparison_extent(int rows, int cols, Extent tile, const RenderOptions& opts) {
  return {opts.title_height + rows * tile.height + (rows + 1) * opts.margin,
          cols * tile.width + (cols + 1) * opts.margin};
}

ProbabilityMap mask_as_probability(const Mask& mask) {
  ProbabilityMap p(mask.height(), mask.width(), 1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) p.at(y, x) = mask.at(y, x) ? 1.0f : 0.0f;
  }
  return p;
}

Image render_comparison(const std::vector<ComparisonSample>& samples, const RenderOptions& opts) {
  if (samples.empty()) throw Error(ErrorKind::Usage, "render_comparison: no samples");
  const auto& first = samples.front();
  const Extent src = extent_of(first.image);
  const std::size_t n_pred = first.predictions.size();
  for (const auto& s : samples) {
    if (extent_of(s.image) != src || extent_of(s.ground_truth) != src || s.image.channels() != 3) {
      throw Error(ErrorKind::Shape, "render_comparison: inputs must share spatial dims");
    }
    if (s.predictions.size() != n_pred) {
      throw Error(ErrorKind::Shape, "render_comparison: every sample needs the same prediction columns");
    }
    for (const auto& p : s.predictions) {
      if (extent_of(p.map) != src) throw Error(ErrorKind::Shape, "render_comparison: prediction '" + p.name + "' dims differ");
    }
  }

  const Extent tile = (opts.tile.height > 0 && opts.tile.width > 0) ? opts.tile : src;
  const int rows = static_cast<int>(samples.size());
  const int cols = 2 + static_cast<int>(n_pred);
  const Extent canvas = comparison_extent(rows, cols, tile, opts);
  cv::Mat img(canvas.height, canvas.width, CV_8UC3, cv::Scalar(255, 255, 255));

  auto origin = [&](int row, int col) {
    return cv::Point(opts.margin + col * (tile.width + opts.margin),
                     opts.title_height + opts.margin + row * (tile.height + opts.margin));
  };
  auto place = [&](int row, int col, auto&& sample_rgb) {
    const cv::Point o = origin(row, col);
    for (int y = 0; y < tile.height; ++y) {
      const int sy = std::min(src.height - 1, y * src.height / tile.height);
      auto* out = img.ptr<cv::Vec3b>(o.y + y);
      for (int x = 0; x < tile.width; ++x) {
        const int sx = std::min(src.width - 1, x * src.width / tile.width);
        out[o.x + x] = sample_rgb(sy, sx);
      }
    }
  };
  auto grey = [](float v) {
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    return cv::Vec3b(g, g, g);
  };

  for (int r = 0; r < rows; ++r) {
    const auto& s = samples[r];
    place(r, 0, [&](int y, int x) { return cv::Vec3b(s.image.at(y, x, 0), s.image.at(y, x, 1), s.image.at(y, x, 2)); });
    place(r, 1, [&](int y, int x) { return grey(s.ground_truth.at(y, x) ? 1.0f : 0.0f); });
    for (std::size_t p = 0; p < n_pred; ++p) {
      const auto& map = s.predictions[p].map;
      place(r, 2 + static_cast<int>(p), [&](int y, int x) { return grey(map.at(y, x)); });
    }
  }

  std::vector<std::string> titles{"Input", "GT Mask"};
  for (const auto& p : first.predictions) titles.push_back(p.name);
  const double scale = std::clamp(tile.width / 220.0, 0.3, 0.8);
  for (int c = 0; c < cols; ++c) {
    int baseline = 0;
    const cv::Size ts = cv::getTextSize(titles[c], cv::FONT_HERSHEY_SIMPLEX, scale, 1, &baseline);
    const int x = origin(0, c).x + std::max(0, (tile.width - ts.width) / 2);
    const int y = std::max(ts.height + 2, (opts.title_height + opts.margin + ts.height) / 2);
    cv::putText(img, titles[c], cv::Point(x, y), cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }

  Image out(canvas.height, canvas.width, 3);
  for (int y = 0; y < canvas.height; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < canvas.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = row[x][c];
    }
  }
  return out;
}

}  // namespace hrfnet

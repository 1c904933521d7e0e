#include "hrfnet/image_io.hpp"

#include <cmath>
#include <cstring>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hrfnet/error.hpp"

namespace hrfnet {
namespace {

const std::vector<int> kPngParams{cv::IMWRITE_PNG_COMPRESSION, 6};

void write_png(const std::string& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path, m, kPngParams);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::Data, "cannot write '" + path + "': " + e.what());
  }
  if (!ok) throw Error(ErrorKind::Data, "cannot write '" + path + "'");
}

}  // namespace

Image read_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorKind::Data, "cannot read image '" + path + "'");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image out(rgb.rows, rgb.cols, 3);
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(out.data() + static_cast<std::size_t>(y) * rgb.cols * 3, rgb.ptr<std::uint8_t>(y),
                static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

void write_image(const std::string& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw Error(ErrorKind::Channels, "write_image: 1 or 3 channels required");
  }
  cv::Mat m(image.height(), image.width(), image.channels() == 3 ? CV_8UC3 : CV_8UC1,
            const_cast<std::uint8_t*>(image.data()));
  if (image.channels() == 3) {
    cv::Mat bgr;
    cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
    write_png(path, bgr);
  } else {
    write_png(path, m);
  }
}

Mask read_mask(const std::string& path) {
  cv::Mat g = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (g.empty()) throw Error(ErrorKind::Data, "cannot read mask '" + path + "'");
  Mask out(g.rows, g.cols, 1);
  for (int y = 0; y < g.rows; ++y) {
    const auto* row = g.ptr<std::uint8_t>(y);
    for (int x = 0; x < g.cols; ++x) out.at(y, x) = row[x] ? 1 : 0;
  }
  return out;
}

void write_mask(const std::string& path, const Mask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  write_png(path, m);
}

void write_probability(const std::string& path, const ProbabilityMap& prob) {
  cv::Mat m(prob.height(), prob.width(), CV_8UC1);
  for (int y = 0; y < prob.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < prob.width(); ++x) {
      row[x] = static_cast<std::uint8_t>(std::lround(std::clamp(prob.at(y, x), 0.0f, 1.0f) * 255.0f));
    }
  }
  write_png(path, m);
}

}  // namespace hrfnet

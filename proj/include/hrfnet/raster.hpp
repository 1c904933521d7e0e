#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hrfnet/error.hpp"

namespace hrfnet {

// Interleaved H x W x C raster.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int height, int width, int channels, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1) {
      throw Error(ErrorKind::Shape, "raster: invalid dimensions " + std::to_string(height) + "x" +
                                        std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool same_shape(const Raster& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  template <typename U>
  bool same_extent(const Raster<U>& o) const noexcept {
    return height_ == o.height() && width_ == o.width();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using Image = Raster<std::uint8_t>;        // H x W x 3, 8-bit
using Mask = Raster<std::uint8_t>;         // H x W x 1, values {0, 1}
using ProbabilityMap = Raster<float>;      // H x W x 1, values in [0, 1]
using ResidualImage = Raster<float>;       // H x W x K

struct Extent {
  int height = 0;
  int width = 0;
  friend bool operator==(const Extent&, const Extent&) = default;
};

template <typename T>
Extent extent_of(const Raster<T>& r) {
  return {r.height(), r.width()};
}

template <typename Dst, typename Src>
Raster<Dst> raster_cast(const Raster<Src>& src) {
  Raster<Dst> out(src.height(), src.width(), src.channels());
  auto in = src.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = static_cast<Dst>(in[i]);
  return out;
}

// Reflect (mirror without repeating the edge sample) index into [0, n).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace hrfnet

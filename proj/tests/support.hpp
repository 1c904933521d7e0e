#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hrfnet/raster.hpp"

namespace testing_support {

using hrfnet::Image;
using hrfnet::Mask;

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "hrfnet_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline Image random_image(int h, int w, std::mt19937_64& rng, int lo = 0, int hi = 255) {
  Image img(h, w, 3);
  std::uniform_int_distribution<int> d(lo, hi);
  for (auto& v : img.values()) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

inline Image constant_image(int h, int w, std::uint8_t v) { return Image(h, w, 3, v); }

// Smooth terrain-like colour field plus per-pixel sensor noise.
inline Image textured_base(int size, std::uint64_t seed, double noise_sigma = 6.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, noise_sigma);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  for (auto& ch : waves) {
    for (int k = 0; k < 6; ++k) ch.push_back({u(rng) * 0.08, u(rng) * 0.08, u(rng) * 6.283, 10 + 25 * u(rng)});
  }
  const double base[3] = {70 + 60 * u(rng), 70 + 60 * u(rng), 60 + 50 * u(rng)};
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = base[c];
        for (const auto& wv : waves[c]) v += wv.amp * std::sin(wv.fx * x + wv.fy * y + wv.phase);
        v += n(rng);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return img;
}

// Every pixel a distinct colour (no accidental equal values across positions).
inline Image unique_colour_image(int size, std::uint64_t seed) {
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(size) * size);
  std::mt19937_64 rng(seed);
  // sample distinct 24-bit codes
  std::uniform_int_distribution<std::uint32_t> d(0, (1u << 24) - 1);
  std::vector<bool> used(1u << 24, false);
  for (auto& id : ids) {
    std::uint32_t c;
    do c = d(rng);
    while (used[c]);
    used[c] = true;
    id = c;
  }
  Image img(size, size, 3);
  for (int i = 0; i < size * size; ++i) {
    img.values()[3 * i] = ids[i] & 0xff;
    img.values()[3 * i + 1] = (ids[i] >> 8) & 0xff;
    img.values()[3 * i + 2] = (ids[i] >> 16) & 0xff;
  }
  return img;
}

// Pixel values restricted to [lo, hi] on every channel.
inline Image banded_image(int size, std::uint64_t seed, int lo, int hi) {
  std::mt19937_64 rng(seed);
  return random_image(size, size, rng, lo, hi);
}

// ---------------------------------------------------------------------------
// Independent oracles

struct OracleKernel {
  int side;
  std::vector<double> taps;  // row-major, before division
  double divisor;
};

// Literature coefficients, typed out independently of the library.
inline std::vector<OracleKernel> oracle_bank() {
  return {
      {5, {-1, 2, -2, 2, -1, 2, -6, 8, -6, 2, -2, 8, -12, 8, -2, 2, -6, 8, -6, 2, -1, 2, -2, 2, -1}, 12.0},
      {3, {-1, 2, -1, 2, -4, 2, -1, 2, -1}, 4.0},
      {5, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, -3, 3, -1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 3.0},
  };
}

inline int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// out(y, x) = clamp(sum_{u,v} k(u, v) * in(y + u, x + v) / d): explicit sliding
// window over a reflect-padded copy, offsets u, v in [-r, r].
inline std::vector<double> direct_convolution(const Image& img, int channel, const OracleKernel& k, double clamp) {
  const int h = img.height(), w = img.width(), r = k.side / 2;
  const int ph = h + 2 * r, pw = w + 2 * r;
  std::vector<double> padded(static_cast<std::size_t>(ph) * pw);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) padded[y * pw + x] = img.at(mirror(y - r, h), mirror(x - r, w), channel);
  std::vector<double> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int u = -r; u <= r; ++u)
        for (int v = -r; v <= r; ++v) acc += k.taps[(u + r) * k.side + (v + r)] * padded[(y + r + u) * pw + (x + r + v)];
      out[y * w + x] = std::max(-clamp, std::min(clamp, acc / k.divisor));
    }
  }
  return out;
}

// Brute-force Mann-Whitney statistic over all positive / negative pairs.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  double num = 0.0;
  double pos = 0.0, neg = 0.0;
  for (auto l : labels) (l ? pos : neg) += 1.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      num += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
    }
  }
  return num / (pos * neg);
}

inline std::size_t count_nonzero(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(), [](auto v) { return v != 0; }));
}

}  // namespace testing_support

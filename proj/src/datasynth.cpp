#include "hrfnet/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hrfnet/error.hpp"

namespace hrfnet {
namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Region boxes keep a one-pixel margin to the image border so that removal
// always has a boundary ring.
Point random_box(Rng& rng, const Image& img, int size) {
  const int max_x = img.width() - size - 1;
  const int max_y = img.height() - size - 1;
  if (max_x < 1 || max_y < 1) {
    throw Error(ErrorKind::Placement, "region of " + std::to_string(size) + " px does not fit a " +
                                          std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                                          " image");
  }
  return {uniform_int(rng, 1, max_x), uniform_int(rng, 1, max_y)};
}

void check_box(const Image& img, Point p, int size, const char* what) {
  if (p.x < 1 || p.y < 1 || p.x + size + 1 > img.width() || p.y + size + 1 > img.height()) {
    throw Error(ErrorKind::Placement, std::string(what) + " box (" + std::to_string(p.x) + ", " +
                                          std::to_string(p.y) + ") size " + std::to_string(size) +
                                          " is out of bounds");
  }
}

bool boxes_overlap(Point a, Point b, int size) {
  return a.x < b.x + size && b.x < a.x + size && a.y < b.y + size && b.y < a.y + size;
}

Image crop(const Image& img, Point p, int size) {
  Image out(size, size, img.channels());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(p.y + y, p.x + x, c);
    }
  }
  return out;
}

// Chessboard distance from each region pixel to the nearest non-region pixel
// (pixels outside the box count as non-region). Zero outside the region.
std::vector<int> inner_distance(const Mask& region) {
  const int n = region.height();
  const int big = 1 << 20;
  std::vector<int> d(static_cast<std::size_t>(n) * n);
  auto at = [&](int y, int x) -> int {
    if (y < 0 || x < 0 || y >= n || x >= n) return 0;
    return d[static_cast<std::size_t>(y) * n + x];
  };
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      int& v = d[static_cast<std::size_t>(y) * n + x];
      if (!region.at(y, x)) {
        v = 0;
        continue;
      }
      v = big;
      for (auto [dy, dx] : {std::pair{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}}) v = std::min(v, at(y + dy, x + dx) + 1);
    }
  }
  for (int y = n - 1; y >= 0; --y) {
    for (int x = n - 1; x >= 0; --x) {
      int& v = d[static_cast<std::size_t>(y) * n + x];
      if (!v) continue;
      for (auto [dy, dx] : {std::pair{1, 1}, {1, 0}, {1, -1}, {0, 1}}) v = std::min(v, at(y + dy, x + dx) + 1);
    }
  }
  return d;
}

std::vector<double> blend_weights(const Mask& region, int feather_radius) {
  const auto d = inner_distance(region);
  std::vector<double> alpha(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    alpha[i] = d[i] == 0 ? 0.0 : std::min(1.0, static_cast<double>(d[i]) / (feather_radius + 1));
  }
  return alpha;
}

// Writes `patch` (size x size x 3) into a copy of base at dest through region
// with feathered weights. Returns the forgery with its mask.
Forgery composite(const Image& base, const Image& patch, const Mask& region, Point dest, Point source,
                  int feather_radius) {
  const int size = region.height();
  const auto alpha = blend_weights(region, feather_radius);
  Forgery out{base, Mask(base.height(), base.width(), 1), dest, source};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double a = alpha[static_cast<std::size_t>(y) * size + x];
      if (a <= 0.0) continue;
      out.mask.at(dest.y + y, dest.x + x) = 1;
      for (int c = 0; c < 3; ++c) {
        auto& px = out.image.at(dest.y + y, dest.x + x, c);
        if (a >= 1.0) {
          px = patch.at(y, x, c);
        } else {
          px = static_cast<std::uint8_t>(std::lround(a * patch.at(y, x, c) + (1.0 - a) * px));
        }
      }
    }
  }
  return out;
}

void require_rgb(const Image& img, const char* what) {
  if (img.channels() != 3) throw Error(ErrorKind::Channels, std::string(what) + " must be a 3-channel image");
}

}  // namespace

std::string to_string(ForgeryKind kind) {
  switch (kind) {
    case ForgeryKind::Splice:
      return "splice";
    case ForgeryKind::CopyMove:
      return "copy_move";
    case ForgeryKind::Removal:
      return "removal";
  }
  return "?";
}

std::string to_string(RegionShape shape) {
  switch (shape) {
    case RegionShape::Ellipse:
      return "ellipse";
    case RegionShape::Polygon:
      return "polygon";
    case RegionShape::DonorSilhouette:
      return "donor_silhouette";
  }
  return "?";
}

ForgeryKind parse_forgery_kind(const std::string& s) {
  if (s == "splice") return ForgeryKind::Splice;
  if (s == "copy_move" || s == "copy-move") return ForgeryKind::CopyMove;
  if (s == "removal") return ForgeryKind::Removal;
  throw Error(ErrorKind::Config, "unknown forgery kind '" + s + "'");
}

RegionShape parse_region_shape(const std::string& s) {
  if (s == "ellipse") return RegionShape::Ellipse;
  if (s == "polygon") return RegionShape::Polygon;
  if (s == "donor_silhouette") return RegionShape::DonorSilhouette;
  throw Error(ErrorKind::Config, "unknown region shape '" + s + "'");
}

void ForgeryRecipe::validate() const {
  if (size_px < 16 || size_px > 512) {
    throw Error(ErrorKind::Config, "recipe size_px must lie in [16, 512], got " + std::to_string(size_px));
  }
  if (feather_radius < 0) throw Error(ErrorKind::Config, "recipe feather_radius must be >= 0");
}

Mask rasterize_region(RegionShape shape, int size, std::uint64_t seed, const Image* content) {
  Mask m(size, size, 1);
  const double half = size / 2.0;
  switch (shape) {
    case RegionShape::Ellipse: {
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double u = (x + 0.5 - half) / half;
          const double v = (y + 0.5 - half) / half;
          m.at(y, x) = u * u + v * v <= 1.0 ? 1 : 0;
        }
      }
      break;
    }
    case RegionShape::Polygon: {
      // vertices on a random rotated ellipse are in convex position
      Rng rng(seed);
      const int n = uniform_int(rng, 5, 9);
      const double a = uniform_real(rng, 0.6, 1.0) * half;
      const double b = uniform_real(rng, 0.6, 1.0) * half;
      const double rot = uniform_real(rng, 0.0, std::numbers::pi);
      // jittered, evenly spread angles keep the polygon from collapsing to a sliver
      const double offset = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
      std::vector<double> angles(n);
      for (int i = 0; i < n; ++i) angles[i] = offset + 2.0 * std::numbers::pi * (i + uniform_real(rng, 0.0, 0.7)) / n;
      std::vector<std::pair<double, double>> pts;
      for (double t : angles) {
        const double px = a * std::cos(t), py = b * std::sin(t);
        pts.emplace_back(half + px * std::cos(rot) - py * std::sin(rot), half + px * std::sin(rot) + py * std::cos(rot));
      }
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double cx = x + 0.5, cy = y + 0.5;
          bool inside = true;
          for (int i = 0; i < n && inside; ++i) {
            const auto [x0, y0] = pts[i];
            const auto [x1, y1] = pts[(i + 1) % n];
            inside = (x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0) >= 0.0;
          }
          m.at(y, x) = inside ? 1 : 0;
        }
      }
      break;
    }
    case RegionShape::DonorSilhouette: {
      if (!content || content->height() != size || content->width() != size || content->channels() != 3) {
        throw Error(ErrorKind::Usage, "donor silhouette needs a size x size RGB source block");
      }
      // bright half of the inscribed ellipse
      Mask ellipse = rasterize_region(RegionShape::Ellipse, size, seed);
      std::vector<double> lum;
      auto luma = [&](int y, int x) {
        return 0.299 * content->at(y, x, 0) + 0.587 * content->at(y, x, 1) + 0.114 * content->at(y, x, 2);
      };
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (ellipse.at(y, x)) lum.push_back(luma(y, x));
        }
      }
      auto mid = lum.begin() + static_cast<std::ptrdiff_t>(lum.size() / 2);
      std::nth_element(lum.begin(), mid, lum.end());
      const double median = *mid;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) m.at(y, x) = ellipse.at(y, x) && luma(y, x) >= median ? 1 : 0;
      }
      break;
    }
  }
  return m;
}

Forgery splice(const Image& base, const Image& donor, const ForgeryRecipe& recipe) {
  recipe.validate();
  require_rgb(base, "base");
  require_rgb(donor, "donor");
  Rng rng(recipe.seed);
  const int size = recipe.size_px;
  const Point dest = recipe.location ? *recipe.location : random_box(rng, base, size);
  check_box(base, dest, size, "destination");
  Point src;
  if (recipe.source) {
    src = *recipe.source;
  } else {
    if (donor.width() < size || donor.height() < size) {
      throw Error(ErrorKind::Placement, "donor is smaller than the requested region");
    }
    src = {uniform_int(rng, 0, donor.width() - size), uniform_int(rng, 0, donor.height() - size)};
  }
  if (src.x < 0 || src.y < 0 || src.x + size > donor.width() || src.y + size > donor.height()) {
    throw Error(ErrorKind::Placement, "donor source box is out of bounds");
  }
  const Image patch = crop(donor, src, size);
  const Mask region = rasterize_region(recipe.shape, size, entry_seed(recipe.seed, 1), &patch);
  return composite(base, patch, region, dest, src, recipe.feather_radius);
}

Forgery copy_move(const Image& base, const ForgeryRecipe& recipe) {
  recipe.validate();
  require_rgb(base, "base");
  Rng rng(recipe.seed);
  const int size = recipe.size_px;
  Point src{}, dest{};
  bool placed = false;
  for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
    src = recipe.source ? *recipe.source : random_box(rng, base, size);
    dest = recipe.location ? *recipe.location : random_box(rng, base, size);
    placed = !boxes_overlap(src, dest, size);
    if (recipe.source && recipe.location) break;
  }
  if (!placed) {
    throw Error(ErrorKind::Placement, "copy-move: no disjoint source/destination for a " + std::to_string(size) +
                                          " px region");
  }
  check_box(base, src, size, "source");
  check_box(base, dest, size, "destination");
  const Image patch = crop(base, src, size);
  const Mask region = rasterize_region(recipe.shape, size, entry_seed(recipe.seed, 1), &patch);
  return composite(base, patch, region, dest, src, recipe.feather_radius);
}

Forgery removal(const Image& base, const ForgeryRecipe& recipe) {
  recipe.validate();
  require_rgb(base, "base");
  Rng rng(recipe.seed);
  const int size = recipe.size_px;
  const Point dest = recipe.location ? *recipe.location : random_box(rng, base, size);
  check_box(base, dest, size, "destination");
  const Image block = crop(base, dest, size);
  const Mask region = rasterize_region(recipe.shape, size, entry_seed(recipe.seed, 1), &block);

  // work on the box grown by one pixel so every region pixel has its 4-neighbours
  const int n = size + 2;
  auto in_region = [&](int y, int x) {
    return y >= 1 && x >= 1 && y <= size && x <= size && region.at(y - 1, x - 1);
  };
  Image patch(size, size, 3);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> cur(static_cast<std::size_t>(n) * n);
    double ring_sum = 0.0;
    int ring_count = 0;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double v = base.at(dest.y - 1 + y, dest.x - 1 + x, c);
        cur[static_cast<std::size_t>(y) * n + x] = v;
        if (in_region(y, x)) continue;
        const bool ring = (y > 0 && in_region(y - 1, x)) || (y + 1 < n && in_region(y + 1, x)) ||
                          (x > 0 && in_region(y, x - 1)) || (x + 1 < n && in_region(y, x + 1));
        if (ring) {
          ring_sum += v;
          ++ring_count;
        }
      }
    }
    const double init = ring_count ? ring_sum / ring_count : 0.0;
    for (int y = 1; y <= size; ++y) {
      for (int x = 1; x <= size; ++x) {
        if (in_region(y, x)) cur[static_cast<std::size_t>(y) * n + x] = init;
      }
    }
    std::vector<double> next = cur;
    for (int it = 0; it < kRemovalIterations; ++it) {
      for (int y = 1; y <= size; ++y) {
        for (int x = 1; x <= size; ++x) {
          if (!in_region(y, x)) continue;
          const std::size_t i = static_cast<std::size_t>(y) * n + x;
          next[i] = 0.25 * (cur[i - 1] + cur[i + 1] + cur[i - n] + cur[i + n]);
        }
      }
      std::swap(cur, next);
    }
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        patch.at(y, x, c) = static_cast<std::uint8_t>(
            std::lround(std::clamp(cur[static_cast<std::size_t>(y + 1) * n + x + 1], 0.0, 255.0)));
      }
    }
  }
  return composite(base, patch, region, dest, dest, recipe.feather_radius);
}

Forgery apply_recipe(const Image& base, const Image& donor, const ForgeryRecipe& recipe) {
  switch (recipe.kind) {
    case ForgeryKind::Splice:
      return splice(base, donor, recipe);
    case ForgeryKind::CopyMove:
      return copy_move(base, recipe);
    case ForgeryKind::Removal:
      return removal(base, recipe);
  }
  throw Error(ErrorKind::Config, "unknown forgery kind");
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "synth config: " + m); };
  if (count < 1) fail("count must be >= 1");
  if (size < 32) fail("size must be >= 32");
  if (kinds.empty()) fail("no forgery kinds");
  if (shapes.empty()) fail("no region shapes");
  if (region_sizes.empty()) fail("no region sizes");
  for (int s : region_sizes) {
    if (s < 16 || s > 512) fail("region size " + std::to_string(s) + " outside [16, 512]");
  }
  if (feather_radius < 0) fail("feather_radius must be >= 0");
  if (split.train < 0 || split.val < 0 || split.test < 0 || split.train + split.val + split.test <= 0) {
    fail("split fractions must be non-negative with a positive sum");
  }
  if (jobs < 1) fail("jobs must be >= 1");
}

std::uint64_t entry_seed(std::uint64_t global_seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(global_seed ^ mix(index));
}

Image center_crop(const Image& image, int size) {
  if (image.height() < size || image.width() < size) {
    throw Error(ErrorKind::Data, "image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                                     " is smaller than " + std::to_string(size) + "x" + std::to_string(size));
  }
  return crop(image, {(image.width() - size) / 2, (image.height() - size) / 2}, size);
}

}  // namespace hrfnet

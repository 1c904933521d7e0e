#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hrfnet/raster.hpp"

namespace hrfnet {

enum class ForgeryKind { Splice, CopyMove, Removal };
enum class RegionShape { Ellipse, Polygon, DonorSilhouette };

std::string to_string(ForgeryKind kind);
std::string to_string(RegionShape shape);
ForgeryKind parse_forgery_kind(const std::string& s);
RegionShape parse_region_shape(const std::string& s);

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct ForgeryRecipe {
  ForgeryKind kind = ForgeryKind::Splice;
  RegionShape shape = RegionShape::Ellipse;
  int size_px = 64;                 // side of the region's bounding box
  std::optional<Point> location;    // top-left of the destination box; random when empty
  std::optional<Point> source;      // top-left of the source box (donor or base); random when empty
  int feather_radius = 0;           // 0: no blending, otherwise feathered edge of this width
  std::uint64_t seed = 0;

  void validate() const;  // size_px in [16, 512], feather_radius >= 0
  friend bool operator==(const ForgeryRecipe&, const ForgeryRecipe&) = default;
};

struct Forgery {
  Image image;
  Mask mask;
  Point destination;  // resolved placements
  Point source;
};

// Region support inside a size x size box. `content` (size x size x 3) is only
// read for DonorSilhouette.
Mask rasterize_region(RegionShape shape, int size, std::uint64_t seed, const Image* content = nullptr);

// Pastes a donor region into base. Mask covers every pixel with nonzero blend weight.
Forgery splice(const Image& base, const Image& donor, const ForgeryRecipe& recipe);
// Duplicates a region of base onto a disjoint destination; mask marks the destination only.
Forgery copy_move(const Image& base, const ForgeryRecipe& recipe);
// Erases a region by iterative boundary diffusion (200 Jacobi sweeps).
Forgery removal(const Image& base, const ForgeryRecipe& recipe);

// Runs the recipe's kind; donor is ignored unless kind == Splice.
Forgery apply_recipe(const Image& base, const Image& donor, const ForgeryRecipe& recipe);

inline constexpr int kRemovalIterations = 200;
inline constexpr int kPlacementAttempts = 100;

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SynthConfig {
  int count = 30;
  int size = 1000;
  std::vector<ForgeryKind> kinds{ForgeryKind::Splice, ForgeryKind::CopyMove, ForgeryKind::Removal};
  std::vector<RegionShape> shapes{RegionShape::Ellipse, RegionShape::Polygon};
  std::vector<int> region_sizes{16, 32, 64, 128, 256};
  int feather_radius = 0;
  SplitFractions split;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

// Per-entry seed; independent of processing order.
std::uint64_t entry_seed(std::uint64_t global_seed, std::uint64_t index);

// Center crop to size x size; throws ErrorKind::Data when the image is smaller.
Image center_crop(const Image& image, int size);

}  // namespace hrfnet

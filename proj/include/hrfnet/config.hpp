#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hrfnet/raster.hpp"

namespace hrfnet {

// Flat "dotted.key = value" text; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values_file(const std::string& path);
std::string format_key_values(const KeyValues& kv);

// Typed accessors; throw ErrorKind::Config on malformed values.
int kv_int(const std::string& key, const std::string& value);
std::uint64_t kv_uint64(const std::string& key, const std::string& value);
double kv_double(const std::string& key, const std::string& value);
bool kv_bool(const std::string& key, const std::string& value);
std::vector<int> kv_int_list(const std::string& key, const std::string& value);
Extent kv_extent(const std::string& key, const std::string& value);
std::string format_extent(Extent e);
std::string format_double(double v);

// Inverted-residual block of the lightweight (MobileNet-v3 style) backbone.
struct BottleneckSpec {
  int kernel = 3;
  int expand = 16;
  int out = 16;
  bool squeeze_excite = false;
  bool hard_swish = false;
  int stride = 1;
  friend bool operator==(const BottleneckSpec&, const BottleneckSpec&) = default;
};

struct ModelConfig {
  Extent full_res{1024, 1024};
  Extent deep_input{224, 224};

  // shallow branch: MobileNet-v3 (large) stem + blocks, truncated at stride 8
  int shallow_stem = 16;
  std::vector<BottleneckSpec> shallow_blocks{
      {3, 16, 16, false, false, 1},  {3, 64, 24, false, false, 2}, {3, 72, 24, false, false, 1},
      {5, 72, 40, true, false, 2},   {5, 120, 40, true, false, 1}, {5, 120, 40, true, false, 1},
  };

  // deep branch: ResNet-18
  int deep_stem = 64;
  std::vector<int> deep_widths{64, 128, 256, 512};
  std::vector<int> deep_blocks{2, 2, 2, 2};

  int fusion_channels = 256;
  int low_level_channels = 48;
  std::vector<int> aspp_rates{1, 6, 12, 18};
  int num_classes = 2;
  double width_multiplier = 1.0;

  bool per_channel_srm = true;
  bool use_srm = true;
  std::uint64_t seed = 0;

  // Channel count after width scaling (never below 8).
  int scaled(int channels) const;
  int srm_channels() const;
  // Spatial extent of the stride-8 features the ASPP sees.
  Extent context_extent() const { return {full_res.height / 8, full_res.width / 8}; }

  // Throws ErrorKind::Config on any violated invariant.
  void validate() const;

  KeyValues to_key_values() const;
  std::string to_text() const { return format_key_values(to_key_values()); }
  // Applies "model.*" keys on top of *this; unknown model keys are an error.
  void apply(const KeyValues& kv);
  static ModelConfig from_text(const std::string& text);

  // Reduced configuration for CPU-scale runs at size x size. Keeps the default
  // ASPP rates when they fit the stride-8 feature extent and shrinks them
  // proportionally otherwise.
  static ModelConfig desk(int size, double width_multiplier);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  double lr0 = 1e-3;
  double decay_factor = 0.8;
  int decay_every = 20;
  int epochs = 100;
  int batch_size = 4;
  double tampered_weight = 10.0;
  std::uint64_t seed = 0;
  bool deterministic = true;
  bool augment_flips = false;
  int threads = 1;

  void validate() const;
  KeyValues to_key_values() const;
  void apply(const KeyValues& kv);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace hrfnet

#pragma once

#include <string>
#include <vector>

#include "hrfnet/datasynth.hpp"

namespace hrfnet {

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string id;
  std::string image_path;  // relative to the manifest root
  std::string mask_path;
  std::string base_id;
  Split split = Split::Train;
  ForgeryRecipe recipe;
};

struct DatasetManifest {
  std::string root;  // directory holding images/, masks/ and manifest.json
  int size = 0;
  SplitFractions fractions;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split_entries(Split s) const;
  std::string path_of(const std::string& relative) const;

  // Throws ErrorKind::Data when a base_id appears in more than one split.
  void check_disjoint() const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text, const std::string& root);
  void write() const;  // <root>/manifest.json
  static DatasetManifest load(const std::string& root_or_file);
};

// Reads every image in `bases_dir` (sorted by filename), synthesizes
// cfg.count forgeries into out_root and writes the manifest.
DatasetManifest generate_dataset(const std::string& bases_dir, const std::string& out_root,
                                 const SynthConfig& cfg);

// Same, from in-memory base images (ids must be unique).
DatasetManifest generate_dataset(const std::vector<std::pair<std::string, Image>>& bases,
                                 const std::string& out_root, const SynthConfig& cfg);

}  // namespace hrfnet

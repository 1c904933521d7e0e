#include "hrfnet/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hrfnet/dataset.hpp"
#include "hrfnet/error.hpp"
#include "hrfnet/image_io.hpp"

namespace hrfnet {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json recipe_to_json(const ForgeryRecipe& r) {
  json j{{"kind", to_string(r.kind)},
         {"shape", to_string(r.shape)},
         {"size_px", r.size_px},
         {"feather_radius", r.feather_radius},
         {"seed", r.seed}};
  if (r.location) j["location"] = {r.location->x, r.location->y};
  if (r.source) j["source"] = {r.source->x, r.source->y};
  return j;
}

ForgeryRecipe recipe_from_json(const json& j) {
  ForgeryRecipe r;
  r.kind = parse_forgery_kind(j.at("kind").get<std::string>());
  r.shape = parse_region_shape(j.at("shape").get<std::string>());
  r.size_px = j.at("size_px").get<int>();
  r.feather_radius = j.value("feather_radius", 0);
  r.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("location")) r.location = Point{j["location"][0].get<int>(), j["location"][1].get<int>()};
  if (j.contains("source")) r.source = Point{j["source"][0].get<int>(), j["source"][1].get<int>()};
  return r;
}

std::string entry_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::set<std::string> known{".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp", ".ppm"};
  return known.count(ext) > 0;
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::Config, "unknown split '" + s + "'");
}

std::vector<ManifestEntry> DatasetManifest::split_entries(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

std::string DatasetManifest::path_of(const std::string& relative) const {
  return (fs::path(root) / relative).string();
}

void DatasetManifest::check_disjoint() const {
  std::map<std::string, Split> seen;
  for (const auto& e : entries) {
    auto [it, inserted] = seen.emplace(e.base_id, e.split);
    if (!inserted && it->second != e.split) {
      throw Error(ErrorKind::Data, "base '" + e.base_id + "' appears in both " + to_string(it->second) + " and " +
                                       to_string(e.split));
    }
  }
}

std::string DatasetManifest::to_json() const {
  json j;
  j["format_version"] = 1;
  j["size"] = size;
  j["split_fractions"] = {{"train", fractions.train}, {"val", fractions.val}, {"test", fractions.test}};
  j["entries"] = json::array();
  for (const auto& e : entries) {
    j["entries"].push_back({{"id", e.id},
                            {"image", e.image_path},
                            {"mask", e.mask_path},
                            {"base_id", e.base_id},
                            {"split", to_string(e.split)},
                            {"recipe", recipe_to_json(e.recipe)}});
  }
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text, const std::string& root) {
  DatasetManifest m;
  m.root = root;
  try {
    const auto j = json::parse(text);
    m.size = j.at("size").get<int>();
    const auto& f = j.at("split_fractions");
    m.fractions = {f.at("train").get<double>(), f.at("val").get<double>(), f.at("test").get<double>()};
    for (const auto& je : j.at("entries")) {
      m.entries.push_back({je.at("id").get<std::string>(), je.at("image").get<std::string>(),
                           je.at("mask").get<std::string>(), je.at("base_id").get<std::string>(),
                           parse_split(je.at("split").get<std::string>()), recipe_from_json(je.at("recipe"))});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Data, std::string("manifest: ") + e.what());
  }
  m.check_disjoint();
  return m;
}

void DatasetManifest::write() const {
  std::ofstream out(fs::path(root) / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorKind::Data, "cannot write manifest in '" + root + "'");
  out << to_json();
}

DatasetManifest DatasetManifest::load(const std::string& root_or_file) {
  fs::path p(root_or_file);
  if (fs::is_directory(p)) p /= "manifest.json";
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::Data, "cannot open manifest '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), p.parent_path().string());
}

DatasetManifest generate_dataset(const std::string& bases_dir, const std::string& out_root,
                                 const SynthConfig& cfg) {
  if (!fs::is_directory(bases_dir)) throw Error(ErrorKind::Data, "base directory '" + bases_dir + "' not found");
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(bases_dir)) {
    if (de.is_regular_file() && is_image_file(de.path())) files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::Data, "base directory '" + bases_dir + "' has no images");
  std::vector<std::pair<std::string, Image>> bases;
  for (const auto& f : files) bases.emplace_back(f.stem().string(), read_image(f.string()));
  return generate_dataset(bases, out_root, cfg);
}

DatasetManifest generate_dataset(const std::vector<std::pair<std::string, Image>>& bases,
                                 const std::string& out_root, const SynthConfig& cfg) {
  cfg.validate();
  if (bases.empty()) throw Error(ErrorKind::Data, "no base images");

  std::vector<int> sizes;
  for (int s : cfg.region_sizes) {
    if (2 * s + 3 <= cfg.size) sizes.push_back(s);  // room for two disjoint boxes plus margins
  }
  if (sizes.empty()) throw Error(ErrorKind::Config, "no region size fits a " + std::to_string(cfg.size) + " px image");

  std::vector<Image> cropped;
  std::set<std::string> ids;
  for (const auto& [id, img] : bases) {
    if (!ids.insert(id).second) throw Error(ErrorKind::Data, "duplicate base id '" + id + "'");
    if (img.height() < cfg.size || img.width() < cfg.size) {
      throw Error(ErrorKind::Data, "base '" + id + "' is " + std::to_string(img.height()) + "x" +
                                       std::to_string(img.width()) + ", smaller than " + std::to_string(cfg.size));
    }
    cropped.push_back(center_crop(img, cfg.size));
  }

  // assign whole bases to splits
  const int nb = static_cast<int>(bases.size());
  std::vector<int> order(nb);
  for (int i = 0; i < nb; ++i) order[i] = i;
  std::mt19937_64 split_rng(entry_seed(cfg.seed, 0xfffffffffULL));
  std::shuffle(order.begin(), order.end(), split_rng);
  const double total = cfg.split.train + cfg.split.val + cfg.split.test;
  int n_val = static_cast<int>(std::floor(cfg.split.val / total * nb));
  int n_test = static_cast<int>(std::floor(cfg.split.test / total * nb));
  if (cfg.split.train > 0 && n_val + n_test >= nb) {
    // keep at least one training base
    if (n_test > 0) --n_test;
    else if (n_val > 0) --n_val;
  }
  std::vector<Split> base_split(nb, Split::Train);
  for (int k = 0; k < nb; ++k) {
    if (k < n_val) base_split[order[k]] = Split::Val;
    else if (k < n_val + n_test) base_split[order[k]] = Split::Test;
  }

  fs::create_directories(fs::path(out_root) / "images");
  fs::create_directories(fs::path(out_root) / "masks");

  DatasetManifest manifest;
  manifest.root = out_root;
  manifest.size = cfg.size;
  manifest.fractions = cfg.split;
  manifest.entries.resize(cfg.count);

  auto make_entry = [&](int i) {
    const std::uint64_t seed = entry_seed(cfg.seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(seed);
    const int b = std::uniform_int_distribution<int>(0, nb - 1)(rng);
    std::vector<int> donors;
    for (int k = 0; k < nb; ++k) {
      if (k != b && base_split[k] == base_split[b]) donors.push_back(k);
    }
    const int d = donors.empty() ? b : donors[std::uniform_int_distribution<int>(0, static_cast<int>(donors.size()) - 1)(rng)];

    ForgeryRecipe r;
    r.kind = cfg.kinds[i % cfg.kinds.size()];
    r.shape = cfg.shapes[std::uniform_int_distribution<std::size_t>(0, cfg.shapes.size() - 1)(rng)];
    r.size_px = sizes[std::uniform_int_distribution<std::size_t>(0, sizes.size() - 1)(rng)];
    r.feather_radius = cfg.feather_radius;
    r.seed = rng();

    const Forgery f = apply_recipe(cropped[b], cropped[d], r);
    // record the resolved placement so the entry replays without randomness
    r.location = f.destination;
    if (r.kind != ForgeryKind::Removal) r.source = f.source;

    ManifestEntry e;
    e.id = entry_id(i);
    e.image_path = "images/" + e.id + ".png";
    e.mask_path = "masks/" + e.id + ".png";
    e.base_id = bases[b].first;
    e.split = base_split[b];
    e.recipe = r;
    write_image(manifest.path_of(e.image_path), f.image);
    write_mask(manifest.path_of(e.mask_path), f.mask);
    manifest.entries[i] = std::move(e);
  };

  if (cfg.jobs == 1) {
    for (int i = 0; i < cfg.count; ++i) make_entry(i);
  } else {
    std::vector<std::exception_ptr> errors(cfg.jobs);
    {
      std::vector<std::jthread> workers;
      for (int t = 0; t < cfg.jobs; ++t) {
        workers.emplace_back([&, t] {
          try {
            for (int i = t; i < cfg.count; i += cfg.jobs) make_entry(i);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  manifest.check_disjoint();
  manifest.write();
  return manifest;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, Split split) {
  std::vector<Sample> out;
  for (const auto& e : manifest.split_entries(split)) {
    Sample s{e.id, read_image(manifest.path_of(e.image_path)), read_mask(manifest.path_of(e.mask_path))};
    if (!s.image.same_extent(s.mask)) throw Error(ErrorKind::Data, "entry " + e.id + ": image and mask dims differ");
    if (manifest.size && (s.image.height() != manifest.size || s.image.width() != manifest.size)) {
      throw Error(ErrorKind::Data, "entry " + e.id + ": dims differ from manifest size " + std::to_string(manifest.size));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hrfnet

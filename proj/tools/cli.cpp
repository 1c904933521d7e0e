#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "hrfnet/bench.hpp"
#include "hrfnet/checkpoint.hpp"
#include "hrfnet/dataset.hpp"
#include "hrfnet/error.hpp"
#include "hrfnet/eval.hpp"
#include "hrfnet/image_io.hpp"
#include "hrfnet/manifest.hpp"
#include "hrfnet/render.hpp"
#include "hrfnet/train.hpp"

extern char** environ;

namespace hrfnet::cli {
namespace fs = std::filesystem;

std::string to_string(Source s) {
  switch (s) {
    case Source::Default:
      return "default";
    case Source::File:
      return "file";
    case Source::Env:
      return "env";
    case Source::Flag:
      return "flag";
    case Source::Derived:
      return "derived";
  }
  return "?";
}

std::string env_name(const std::string& key) {
  std::string out = "HRFNET_";
  for (char c : key) out += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

RunConfig::RunConfig() {
  merge(ModelConfig{}.to_key_values(), Source::Default);
  merge(TrainConfig{}.to_key_values(), Source::Default);
  merge(
      {
          {"synth.bases", ""},
          {"synth.count", "30"},
          {"synth.size", "1000"},
          {"synth.seed", "0"},
          {"synth.feather_radius", "0"},
          {"synth.region_sizes", "16,32,64,128,256"},
          {"synth.kinds", "splice,copy_move,removal"},
          {"synth.shapes", "ellipse,polygon"},
          {"synth.split", "0.8,0.1,0.1"},
          {"synth.jobs", "1"},
          {"data.manifest", ""},
          {"output.dir", ""},
          {"checkpoint", ""},
          {"init.checkpoint", ""},
          {"eval.split", "test"},
          {"eval.auc_mode", "pooled"},
          {"eval.threshold", "0.5"},
          {"eval.measure_memory", "false"},
          {"bench.iters", "20"},
          {"bench.warmup", "3"},
          {"bench.method", "HRFNet"},
          {"bench.input", ""},
          {"predict.image", ""},
          {"predict.threshold", "0.5"},
          {"visualize.split", "test"},
          {"visualize.count", "4"},
          {"visualize.tile", "0"},
          {"visualize.compare", ""},
      },
      Source::Default);
}

void RunConfig::set(const std::string& key, const std::string& value, Source source) {
  values_[key] = value;
  sources_[key] = source;
}

void RunConfig::merge(const KeyValues& kv, Source source) {
  for (const auto& [k, v] : kv) {
    if (source != Source::Default && !values_.count(k)) {
      throw Error(ErrorKind::Usage, "unknown configuration key '" + k + "'");
    }
    set(k, v, source);
  }
}

void RunConfig::merge_environment(const std::map<std::string, std::string>& env) {
  const KeyValues snapshot = values_;
  for (const auto& [key, value] : snapshot) {
    if (auto it = env.find(env_name(key)); it != env.end()) set(key, it->second, Source::Env);
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::Usage, "unknown configuration key '" + key + "'");
  return it->second;
}

Source RunConfig::source(const std::string& key) const {
  auto it = sources_.find(key);
  return it == sources_.end() ? Source::Default : it->second;
}

ModelConfig RunConfig::model() const {
  ModelConfig cfg;
  cfg.apply(values_);
  return cfg;
}

TrainConfig RunConfig::train() const {
  TrainConfig cfg;
  cfg.apply(values_);
  return cfg;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "# resolved run configuration (precedence: default < file < env < flag)\n";
  for (const auto& [k, v] : values_) out << k << " = " << v << "  # " << to_string(source(k)) << "\n";
  return out.str();
}

void RunConfig::write(const std::string& path) const {
  fs::create_directories(fs::path(path).parent_path().empty() ? fs::path(".") : fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Data, "cannot write '" + path + "'");
  out << to_text();
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::string& require(const RunConfig& rc, const std::string& key, const std::string& flag) {
  const auto& v = rc.get(key);
  if (v.empty()) throw Error(ErrorKind::Usage, "missing required " + flag + " (or '" + key + "' in --config)");
  return v;
}

int round32(int v) { return (v + 31) / 32 * 32; }

// Fills resolution-dependent model keys for a data size unless set explicitly.
void derive_resolution(RunConfig& rc, int data_size) {
  if (rc.source("model.full_res") != Source::Default) return;
  const ModelConfig desk = ModelConfig::desk(round32(data_size), kv_double("model.width_multiplier", rc.get("model.width_multiplier")));
  const KeyValues kv = desk.to_key_values();
  for (const char* key : {"model.full_res", "model.deep_input", "model.aspp_rates"}) {
    if (rc.source(key) == Source::Default) rc.set(key, kv.at(key), Source::Derived);
  }
}

// A loaded checkpoint fixes the architecture; record it instead of the defaults.
void record_model(RunConfig& rc, const ModelConfig& cfg) {
  for (const auto& [k, v] : cfg.to_key_values()) rc.set(k, v, Source::Derived);
}

std::string output_dir(const RunConfig& rc, const std::string& fallback) {
  const auto& v = rc.get("output.dir");
  return v.empty() ? fallback : v;
}

// ---------------------------------------------------------------------------

int cmd_synth(RunConfig& rc, std::ostream& out) {
  const std::string bases = require(rc, "synth.bases", "--bases");
  const std::string root = require(rc, "output.dir", "--out");
  SynthConfig cfg;
  cfg.count = kv_int("synth.count", rc.get("synth.count"));
  cfg.size = kv_int("synth.size", rc.get("synth.size"));
  cfg.seed = kv_uint64("synth.seed", rc.get("synth.seed"));
  cfg.feather_radius = kv_int("synth.feather_radius", rc.get("synth.feather_radius"));
  cfg.region_sizes = kv_int_list("synth.region_sizes", rc.get("synth.region_sizes"));
  cfg.kinds.clear();
  for (const auto& k : split_list(rc.get("synth.kinds"))) cfg.kinds.push_back(parse_forgery_kind(k));
  cfg.shapes.clear();
  for (const auto& s : split_list(rc.get("synth.shapes"))) cfg.shapes.push_back(parse_region_shape(s));
  const auto fr = split_list(rc.get("synth.split"));
  if (fr.size() != 3) throw Error(ErrorKind::Usage, "synth.split needs three fractions train,val,test");
  cfg.split = {kv_double("synth.split", fr[0]), kv_double("synth.split", fr[1]), kv_double("synth.split", fr[2])};
  cfg.jobs = kv_int("synth.jobs", rc.get("synth.jobs"));

  const auto manifest = generate_dataset(bases, root, cfg);
  rc.write((fs::path(root) / "run_config.txt").string());
  int counts[3] = {0, 0, 0};
  for (const auto& e : manifest.entries) ++counts[static_cast<int>(e.split)];
  out << "wrote " << manifest.entries.size() << " pairs at " << cfg.size << "x" << cfg.size << " to " << root
      << " (train " << counts[0] << ", val " << counts[1] << ", test " << counts[2] << ")\n";
  return 0;
}

int cmd_train(RunConfig& rc, std::ostream& out) {
  const auto manifest = DatasetManifest::load(require(rc, "data.manifest", "--manifest"));
  derive_resolution(rc, manifest.size);
  const std::string dir = output_dir(rc, (fs::path(manifest.root) / "train").string());
  const ModelConfig mc = rc.model();
  const TrainConfig tc = rc.train();
  mc.validate();
  tc.validate();
  configure_runtime(tc);
  rc.write((fs::path(dir) / "run_config.txt").string());

  HRFNet model(mc);
  if (const auto& init = rc.get("init.checkpoint"); !init.empty()) {
    out << "initialized " << load_matching_weights(init, model) << " tensors from " << init << "\n";
  }
  out << "model parameters: " << parameter_count(*model) << "\n";
  TrainLoopOptions opts;
  opts.out_dir = dir;
  opts.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << "  lr " << r.lr << "  loss " << r.train_loss << "  val_auc "
        << (std::isnan(r.val_auc) ? std::string("nan") : std::to_string(r.val_auc)) << std::endl;
  };
  const auto result = train_loop(model, manifest, tc, opts);
  out << "best epoch " << result.best_epoch << "; checkpoints in " << dir << "\n";
  return 0;
}

int cmd_eval(RunConfig& rc, std::ostream& out) {
  const std::string ckpt_path = require(rc, "checkpoint", "--checkpoint");
  const auto manifest = DatasetManifest::load(require(rc, "data.manifest", "--manifest"));
  configure_runtime(rc.train());
  auto ckpt = load_checkpoint(ckpt_path);
  record_model(rc, ckpt.config);
  check_resolution(ckpt.config, manifest.size, manifest.size);
  const Split split = parse_split(rc.get("eval.split"));
  const auto samples = load_samples(manifest, split);
  EvalOptions opts;
  opts.mode = parse_auc_mode(rc.get("eval.auc_mode"));
  opts.threshold = kv_double("eval.threshold", rc.get("eval.threshold"));
  auto report = evaluate(ckpt.model, samples, opts);
  if (kv_bool("eval.measure_memory", rc.get("eval.measure_memory"))) {
    const auto mem = measure_memory(ckpt.config, {manifest.size, manifest.size});
    report.memory_mb = mem.megabytes;
    report.memory_mode = mem.mode;
  }
  const std::string dir = output_dir(rc, fs::path(ckpt_path).parent_path().string());
  fs::create_directories(dir);
  const auto report_path = fs::path(dir) / ("metrics_" + to_string(split) + ".json");
  std::ofstream(report_path) << report.to_json();
  rc.write((fs::path(dir) / ("eval_" + to_string(split) + "_run_config.txt")).string());
  out << "AUC (" << to_string(opts.mode) << ", " << to_string(split) << ", " << report.n_images
      << " images): " << report.auc << "\n";
  if (report.excluded_single_class) out << "excluded single-class images: " << report.excluded_single_class << "\n";
  out << "report: " << report_path.string() << "\n";
  return 0;
}

int cmd_bench(RunConfig& rc, std::ostream& out) {
  configure_runtime(rc.train());
  ModelConfig cfg;
  HRFNet model{nullptr};
  if (const auto& path = rc.get("checkpoint"); !path.empty()) {
    auto ckpt = load_checkpoint(path);
    cfg = ckpt.config;
    model = ckpt.model;
    record_model(rc, cfg);
  } else {
    cfg = rc.model();
    model = HRFNet(cfg);
  }
  Extent input = cfg.full_res;
  if (const auto& in = rc.get("bench.input"); !in.empty()) {
    input = kv_extent("bench.input", in);
  } else if (cfg.full_res == Extent{1024, 1024}) {
    input = {1000, 1000};
    rc.set("bench.input", "1000x1000", Source::Derived);
  }
  const int iters = kv_int("bench.iters", rc.get("bench.iters"));
  const int warmup = kv_int("bench.warmup", rc.get("bench.warmup"));

  BenchRow row;
  row.method = rc.get("bench.method");
  row.memory = measure_memory(cfg, input);
  row.fps = measure_fps(model, input, iters, warmup);
  const std::string table = format_bench_table({row});
  out << table << "input " << format_extent(input) << ", batch 1, no gradients, memory mode " << row.memory.mode
      << "\n";
  if (const auto& dir = rc.get("output.dir"); !dir.empty()) {
    fs::create_directories(dir);
    std::ofstream(fs::path(dir) / "bench.txt") << table;
    rc.write((fs::path(dir) / "run_config.txt").string());
  }
  return 0;
}

int cmd_predict(RunConfig& rc, std::ostream& out) {
  const std::string image_path = require(rc, "predict.image", "--image");
  const std::string ckpt_path = require(rc, "checkpoint", "--checkpoint");
  configure_runtime(rc.train());
  auto ckpt = load_checkpoint(ckpt_path);
  record_model(rc, ckpt.config);
  const Image image = read_image(image_path);
  check_resolution(ckpt.config, image.height(), image.width());
  const auto pred = predict_mask(ckpt.model, image, kv_double("predict.threshold", rc.get("predict.threshold")));

  const std::string dir = output_dir(rc, fs::path(image_path).parent_path().string());
  fs::create_directories(dir);
  const std::string stem = fs::path(image_path).stem().string();
  const auto prob_path = fs::path(dir) / (stem + "_prob.png");
  const auto mask_path = fs::path(dir) / (stem + "_mask.png");
  write_probability(prob_path.string(), pred.probability);
  write_mask(mask_path.string(), pred.mask);
  rc.write((fs::path(dir) / (stem + "_run_config.txt")).string());
  out << "wrote " << prob_path.string() << " and " << mask_path.string() << "\n";
  return 0;
}

int cmd_visualize(RunConfig& rc, std::ostream& out) {
  const std::string ckpt_path = require(rc, "checkpoint", "--checkpoint");
  const auto manifest = DatasetManifest::load(require(rc, "data.manifest", "--manifest"));
  configure_runtime(rc.train());

  std::vector<std::pair<std::string, std::string>> models{{"HRFNet", ckpt_path}};
  for (const auto& item : split_list(rc.get("visualize.compare"))) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Usage, "--compare expects name=checkpoint");
    models.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }

  auto samples = load_samples(manifest, parse_split(rc.get("visualize.split")));
  const int count = kv_int("visualize.count", rc.get("visualize.count"));
  if (samples.empty()) throw Error(ErrorKind::Data, "no samples in the requested split");
  if (static_cast<int>(samples.size()) > count) samples.resize(count);

  std::vector<ComparisonSample> rows;
  for (const auto& s : samples) rows.push_back({s.image, s.mask, {}});
  for (const auto& [name, path] : models) {
    auto ckpt = load_checkpoint(path);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      check_resolution(ckpt.config, samples[i].image.height(), samples[i].image.width());
      rows[i].predictions.push_back({name, mask_as_probability(predict_mask(ckpt.model, samples[i].image).mask)});
    }
  }
  RenderOptions ro;
  const int tile = kv_int("visualize.tile", rc.get("visualize.tile"));
  if (tile > 0) ro.tile = {tile, tile};
  const std::string dir = output_dir(rc, fs::path(ckpt_path).parent_path().string());
  fs::create_directories(dir);
  const auto fig = fs::path(dir) / "comparison.png";
  write_image(fig.string(), render_comparison(rows, ro));
  rc.write((fs::path(dir) / "comparison_run_config.txt").string());
  out << "wrote " << fig.string() << " (" << rows.size() << " rows)\n";
  return 0;
}

struct FlagBinding {
  const CLI::App* app;
  CLI::Option* option;
  std::string key;
  std::shared_ptr<std::string> value;
  bool is_switch = false;
  std::shared_ptr<bool> switch_value;
};

class Bindings {
 public:
  void value(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto v = std::make_shared<std::string>();
    bindings_.push_back({app, app->add_option(flag, *v, help + "  [" + key + "]"), key, v});
  }
  void toggle(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto b = std::make_shared<bool>(false);
    FlagBinding fb{app, app->add_flag(flag, *b, help + "  [" + key + "]"), key, nullptr, true, b};
    bindings_.push_back(fb);
  }
  void apply(RunConfig& rc, const CLI::App* active) const {
    for (const auto& b : bindings_) {
      if (b.app != active || b.option->count() == 0) continue;
      rc.set(b.key, b.is_switch ? (*b.switch_value ? "true" : "false") : *b.value, Source::Flag);
    }
  }
  // a flag that drives several keys
  void alias(const std::string& key, const std::string& also) { aliases_.emplace_back(key, also); }
  void apply_aliases(RunConfig& rc) const {
    for (const auto& [key, also] : aliases_) {
      if (rc.source(key) == Source::Flag) rc.set(also, rc.get(key), Source::Flag);
    }
  }

 private:
  std::vector<FlagBinding> bindings_;
  std::vector<std::pair<std::string, std::string>> aliases_;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hrfnet: satellite image forgery localization"};
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "flat key = value configuration file")->check(CLI::ExistingFile);
  Bindings bind;

  auto* synth = app.add_subcommand("synth", "synthesize forged images with ground-truth masks");
  bind.value(synth, "--bases", "synth.bases", "directory of pristine base images");
  bind.value(synth, "--out", "output.dir", "dataset root");
  bind.value(synth, "--count", "synth.count", "number of forgeries");
  bind.value(synth, "--size", "synth.size", "output side length in pixels");
  bind.value(synth, "--seed", "synth.seed", "global seed");
  bind.value(synth, "--feather", "synth.feather_radius", "feathered blending radius (0: none)");
  bind.value(synth, "--region-sizes", "synth.region_sizes", "comma-separated region sizes");
  bind.value(synth, "--kinds", "synth.kinds", "splice,copy_move,removal");
  bind.value(synth, "--shapes", "synth.shapes", "ellipse,polygon,donor_silhouette");
  bind.value(synth, "--split", "synth.split", "train,val,test fractions");
  bind.value(synth, "--jobs", "synth.jobs", "worker threads");

  auto* train = app.add_subcommand("train", "train the network on a synthesized dataset");
  bind.value(train, "--manifest", "data.manifest", "dataset root or manifest.json");
  bind.value(train, "--out", "output.dir", "checkpoint / history directory");
  bind.value(train, "--epochs", "train.epochs", "number of epochs");
  bind.value(train, "--lr", "train.lr0", "initial learning rate");
  bind.value(train, "--decay-factor", "train.decay_factor", "step decay multiplier");
  bind.value(train, "--decay-every", "train.decay_every", "epochs between decays");
  bind.value(train, "--batch-size", "train.batch_size", "minibatch size");
  bind.value(train, "--tampered-weight", "train.tampered_weight", "cross-entropy weight of the tampered class");
  bind.value(train, "--seed", "train.seed", "shuffling and initialization seed");
  bind.alias("train.seed", "model.seed");
  bind.value(train, "--width-mult", "model.width_multiplier", "channel width multiplier");
  bind.value(train, "--threads", "train.threads", "intra-op threads");
  bind.toggle(train, "--augment-flips", "train.augment_flips", "random horizontal flips");
  bind.value(train, "--init-checkpoint", "init.checkpoint", "copy matching weights from a checkpoint");

  auto* eval = app.add_subcommand("eval", "pixel AUC of a checkpoint on a dataset split");
  bind.value(eval, "--manifest", "data.manifest", "dataset root or manifest.json");
  bind.value(eval, "--checkpoint", "checkpoint", "checkpoint file");
  bind.value(eval, "--split", "eval.split", "train | val | test");
  bind.value(eval, "--auc-mode", "eval.auc_mode", "pooled | per_image_mean");
  bind.value(eval, "--threshold", "eval.threshold", "threshold for F1 / IoU");
  bind.value(eval, "--out", "output.dir", "report directory");
  bind.toggle(eval, "--measure-memory", "eval.measure_memory", "also record inference memory");

  auto* bench = app.add_subcommand("bench", "inference memory and throughput (batch 1, no gradients)");
  bind.value(bench, "--checkpoint", "checkpoint", "checkpoint (default: freshly initialized model)");
  bind.value(bench, "--width-mult", "model.width_multiplier", "channel width multiplier");
  bind.value(bench, "--size", "model.full_res", "model resolution (multiple of 32)");
  bind.value(bench, "--input", "bench.input", "input HxW (default: model resolution, 1000x1000 at 1024)");
  bind.value(bench, "--iters", "bench.iters", "timed forward passes");
  bind.value(bench, "--warmup", "bench.warmup", "untimed warm-up passes");
  bind.value(bench, "--method", "bench.method", "row label");
  bind.value(bench, "--out", "output.dir", "write bench.txt and run_config.txt here");

  auto* predict = app.add_subcommand("predict", "probability map and binary mask for one image");
  bind.value(predict, "--image", "predict.image", "input image");
  bind.value(predict, "--checkpoint", "checkpoint", "checkpoint file");
  bind.value(predict, "--threshold", "predict.threshold", "mask threshold in (0, 1)");
  bind.value(predict, "--out", "output.dir", "output directory (default: next to the image)");

  auto* visualize = app.add_subcommand("visualize", "input | GT | prediction comparison grid");
  bind.value(visualize, "--manifest", "data.manifest", "dataset root or manifest.json");
  bind.value(visualize, "--checkpoint", "checkpoint", "checkpoint file");
  bind.value(visualize, "--compare", "visualize.compare", "extra columns as name=checkpoint,...");
  bind.value(visualize, "--split", "visualize.split", "train | val | test");
  bind.value(visualize, "--count", "visualize.count", "number of rows");
  bind.value(visualize, "--tile", "visualize.tile", "tile side in pixels (0: native)");
  bind.value(visualize, "--out", "output.dir", "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    RunConfig rc;
    if (!config_file.empty()) rc.merge(read_key_values_file(config_file), Source::File);
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
      const std::string kv = *e;
      if (kv.rfind("HRFNET_", 0) != 0) continue;
      const auto eq = kv.find('=');
      if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    rc.merge_environment(env);
    bind.apply(rc, active);
    bind.apply_aliases(rc);
    if (active == bench && rc.source("model.full_res") == Source::Flag) {
      const int size = kv_extent("model.full_res", rc.get("model.full_res")).height;
      rc.set("model.full_res", "", Source::Default);  // let the desk rules fill dependent keys
      derive_resolution(rc, size);
    }

    const std::string name = active->get_name();
    if (name == "synth") return cmd_synth(rc, out);
    if (name == "train") return cmd_train(rc, out);
    if (name == "eval") return cmd_eval(rc, out);
    if (name == "bench") return cmd_bench(rc, out);
    if (name == "predict") return cmd_predict(rc, out);
    if (name == "visualize") return cmd_visualize(rc, out);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const c10::Error& e) {
    err << "error: " << e.what_without_backtrace() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace hrfnet::cli

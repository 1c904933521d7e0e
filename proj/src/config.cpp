#include "hrfnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hrfnet/error.hpp"

namespace hrfnet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::Config, "config: '" + key + "' = '" + value + "' is not " + expected);
}

std::string format_blocks(const std::vector<BottleneckSpec>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (i) out += ';';
    out += std::to_string(b.kernel) + ':' + std::to_string(b.expand) + ':' + std::to_string(b.out) + ':' +
           (b.squeeze_excite ? "1" : "0") + ':' + (b.hard_swish ? "1" : "0") + ':' + std::to_string(b.stride);
  }
  return out;
}

std::vector<BottleneckSpec> parse_blocks(const std::string& key, const std::string& value) {
  std::vector<BottleneckSpec> blocks;
  for (const auto& item : split(value, ';')) {
    const auto f = split(item, ':');
    if (f.size() != 6) bad_value(key, value, "a list of kernel:expand:out:se:hswish:stride blocks");
    blocks.push_back({kv_int(key, f[0]), kv_int(key, f[1]), kv_int(key, f[2]), kv_bool(key, f[3]),
                      kv_bool(key, f[4]), kv_int(key, f[5])});
  }
  return blocks;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::Config, "config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Data, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

int kv_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || p != end) bad_value(key, value, "an integer");
  return v;
}

std::uint64_t kv_uint64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || p != end) bad_value(key, value, "an unsigned integer");
  return v;
}

double kv_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool kv_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<int> kv_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& part : split(value, ',')) out.push_back(kv_int(key, part));
  if (out.empty()) bad_value(key, value, "a comma-separated integer list");
  return out;
}

Extent kv_extent(const std::string& key, const std::string& value) {
  const auto x = value.find('x');
  if (x == std::string::npos) {
    const int s = kv_int(key, value);
    return {s, s};
  }
  return {kv_int(key, trim(value.substr(0, x))), kv_int(key, trim(value.substr(x + 1)))};
}

std::string format_extent(Extent e) { return std::to_string(e.height) + "x" + std::to_string(e.width); }

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

// ---------------------------------------------------------------------------

int ModelConfig::scaled(int channels) const {
  return std::max(8, static_cast<int>(std::lround(channels * width_multiplier)));
}

int ModelConfig::srm_channels() const { return per_channel_srm ? 9 : 3; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "model config: " + m); };
  for (Extent e : {full_res, deep_input}) {
    if (e.height < 32 || e.width < 32 || e.height % 32 || e.width % 32) {
      fail("resolution " + format_extent(e) + " must be a positive multiple of 32");
    }
  }
  if (deep_input.height > full_res.height || deep_input.width > full_res.width) {
    fail("deep input " + format_extent(deep_input) + " exceeds full resolution " + format_extent(full_res));
  }
  if (num_classes != 2) fail("num_classes must be 2");
  if (!(width_multiplier > 0.0)) fail("width_multiplier must be > 0");
  if (deep_widths.size() != 4 || deep_blocks.size() != 4) fail("deep backbone needs 4 stages");
  for (int b : deep_blocks) {
    if (b < 1) fail("deep stage block count must be >= 1");
  }
  if (fusion_channels < 1 || low_level_channels < 1 || shallow_stem < 1 || deep_stem < 1) {
    fail("channel counts must be >= 1");
  }

  int stride = 2;  // stem
  bool has_stride4 = false;
  for (const auto& b : shallow_blocks) {
    if (b.stride != 1 && b.stride != 2) fail("shallow block stride must be 1 or 2");
    if (b.kernel < 1 || b.kernel % 2 == 0) fail("shallow block kernel must be odd");
    stride *= b.stride;
    if (stride == 4) has_stride4 = true;
  }
  if (stride != 8 || !has_stride4) fail("shallow blocks must reach stride 4 and end at stride 8");

  if (aspp_rates.empty()) fail("aspp_rates must not be empty");
  const Extent ctx = context_extent();
  for (int r : aspp_rates) {
    if (r < 1) fail("aspp rate must be >= 1");
    if (r > ctx.height || r > ctx.width) {
      fail("aspp rate " + std::to_string(r) + " exceeds feature extent " + format_extent(ctx));
    }
  }
}

KeyValues ModelConfig::to_key_values() const {
  return {
      {"model.full_res", format_extent(full_res)},
      {"model.deep_input", format_extent(deep_input)},
      {"model.shallow.stem", std::to_string(shallow_stem)},
      {"model.shallow.blocks", format_blocks(shallow_blocks)},
      {"model.deep.stem", std::to_string(deep_stem)},
      {"model.deep.widths", format_int_list(deep_widths)},
      {"model.deep.blocks", format_int_list(deep_blocks)},
      {"model.fusion_channels", std::to_string(fusion_channels)},
      {"model.low_level_channels", std::to_string(low_level_channels)},
      {"model.aspp_rates", format_int_list(aspp_rates)},
      {"model.num_classes", std::to_string(num_classes)},
      {"model.width_multiplier", format_double(width_multiplier)},
      {"model.srm.per_channel", per_channel_srm ? "true" : "false"},
      {"model.use_srm", use_srm ? "true" : "false"},
      {"model.seed", std::to_string(seed)},
  };
}

void ModelConfig::apply(const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key.rfind("model.", 0) != 0) continue;
    if (key == "model.full_res") full_res = kv_extent(key, value);
    else if (key == "model.deep_input") deep_input = kv_extent(key, value);
    else if (key == "model.shallow.stem") shallow_stem = kv_int(key, value);
    else if (key == "model.shallow.blocks") shallow_blocks = parse_blocks(key, value);
    else if (key == "model.deep.stem") deep_stem = kv_int(key, value);
    else if (key == "model.deep.widths") deep_widths = kv_int_list(key, value);
    else if (key == "model.deep.blocks") deep_blocks = kv_int_list(key, value);
    else if (key == "model.fusion_channels") fusion_channels = kv_int(key, value);
    else if (key == "model.low_level_channels") low_level_channels = kv_int(key, value);
    else if (key == "model.aspp_rates") aspp_rates = kv_int_list(key, value);
    else if (key == "model.num_classes") num_classes = kv_int(key, value);
    else if (key == "model.width_multiplier") width_multiplier = kv_double(key, value);
    else if (key == "model.srm.per_channel") per_channel_srm = kv_bool(key, value);
    else if (key == "model.use_srm") use_srm = kv_bool(key, value);
    else if (key == "model.seed") seed = kv_uint64(key, value);
    else throw Error(ErrorKind::Config, "unknown model config key '" + key + "'");
  }
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  cfg.apply(parse_key_values(text));
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::desk(int size, double width) {
  ModelConfig cfg;
  cfg.full_res = {size, size};
  if (size >= 1024) {
    cfg.deep_input = {224, 224};
  } else {
    const int deep = std::max(64, (size * 3 / 4) / 32 * 32);
    cfg.deep_input = {std::min(deep, size), std::min(deep, size)};
  }
  cfg.width_multiplier = width;

  const int extent = size / 8;
  const int largest = *std::max_element(cfg.aspp_rates.begin(), cfg.aspp_rates.end());
  if (largest > extent) {
    for (int& r : cfg.aspp_rates) {
      if (r > 1) r = std::max(1, r * extent / largest);
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "train config: " + m); };
  if (!(lr0 > 0.0)) fail("lr0 must be > 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) fail("decay_factor must be in (0, 1]");
  if (decay_every < 1) fail("decay_every must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(tampered_weight > 0.0)) fail("tampered_weight must be > 0");
  if (threads < 1) fail("threads must be >= 1");
}

KeyValues TrainConfig::to_key_values() const {
  return {
      {"train.lr0", format_double(lr0)},
      {"train.decay_factor", format_double(decay_factor)},
      {"train.decay_every", std::to_string(decay_every)},
      {"train.epochs", std::to_string(epochs)},
      {"train.batch_size", std::to_string(batch_size)},
      {"train.tampered_weight", format_double(tampered_weight)},
      {"train.seed", std::to_string(seed)},
      {"train.deterministic", deterministic ? "true" : "false"},
      {"train.augment_flips", augment_flips ? "true" : "false"},
      {"train.threads", std::to_string(threads)},
  };
}

void TrainConfig::apply(const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key.rfind("train.", 0) != 0) continue;
    if (key == "train.lr0") lr0 = kv_double(key, value);
    else if (key == "train.decay_factor") decay_factor = kv_double(key, value);
    else if (key == "train.decay_every") decay_every = kv_int(key, value);
    else if (key == "train.epochs") epochs = kv_int(key, value);
    else if (key == "train.batch_size") batch_size = kv_int(key, value);
    else if (key == "train.tampered_weight") tampered_weight = kv_double(key, value);
    else if (key == "train.seed") seed = kv_uint64(key, value);
    else if (key == "train.deterministic") deterministic = kv_bool(key, value);
    else if (key == "train.augment_flips") augment_flips = kv_bool(key, value);
    else if (key == "train.threads") threads = kv_int(key, value);
    else throw Error(ErrorKind::Config, "unknown train config key '" + key + "'");
  }
}

}  // namespace hrfnet

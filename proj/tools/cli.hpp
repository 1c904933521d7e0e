#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hrfnet/config.hpp"

namespace hrfnet::cli {

enum class Source { Default, File, Env, Flag, Derived };
std::string to_string(Source s);

// Every resolved setting of one subcommand run with the layer that set it.
// Precedence: defaults < config file < HRFNET_* environment < flags.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value, Source source);
  void merge(const KeyValues& kv, Source source);
  // HRFNET_TRAIN_EPOCHS overrides train.epochs, etc. (known keys only).
  void merge_environment(const std::map<std::string, std::string>& env);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  Source source(const std::string& key) const;
  const KeyValues& values() const { return values_; }

  ModelConfig model() const;
  TrainConfig train() const;

  // Key-value text with a provenance comment per line; loadable via --config.
  std::string to_text() const;
  void write(const std::string& path) const;

 private:
  KeyValues values_;
  std::map<std::string, Source> sources_;
};

std::string env_name(const std::string& key);

// Entry point; returns the process exit code (0 ok, 2 usage, 3 data, 4 numeric).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hrfnet::cli

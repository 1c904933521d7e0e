#pragma once

#include <optional>
#include <string>

#include "hrfnet/model.hpp"

namespace hrfnet {

inline constexpr int64_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelConfig config;
  HRFNet model{nullptr};
  int epoch = 0;
  bool has_optimizer_state = false;
};

// Writes config text, weights + buffers, epoch and (optionally) Adam state.
void save_checkpoint(const std::string& path, HRFNet& model, int epoch, torch::optim::Adam* optimizer = nullptr);

// Rebuilds the model from the stored config. When `optimizer` is given, its
// state is restored (the optimizer must already hold model->parameters()).
Checkpoint load_checkpoint(const std::string& path);
void load_optimizer_state(const std::string& path, torch::optim::Adam& optimizer);

// Copies every parameter / buffer whose name and shape match from the archive
// into model (partial initialization hook). Returns the number copied.
int load_matching_weights(const std::string& path, HRFNet& model);

}  // namespace hrfnet

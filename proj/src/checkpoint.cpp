#include "hrfnet/checkpoint.hpp"

#include <filesystem>

#include "hrfnet/error.hpp"

namespace hrfnet {
namespace {

torch::serialize::InputArchive open_archive(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::Data, "checkpoint '" + path + "' not found");
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path);
  } catch (const c10::Error& e) {
    throw Error(ErrorKind::Data, "checkpoint '" + path + "' is unreadable: " + e.what_without_backtrace());
  }
  torch::Tensor version;
  if (!archive.try_read("format_version", version) || version.item<int64_t>() != kCheckpointFormatVersion) {
    throw Error(ErrorKind::Data, "checkpoint '" + path + "' has an unsupported format version");
  }
  return archive;
}

}  // namespace

void save_checkpoint(const std::string& path, HRFNet& model, int epoch, torch::optim::Adam* optimizer) {
  torch::serialize::OutputArchive archive;
  archive.write("format_version", torch::tensor(kCheckpointFormatVersion));
  archive.write("config", c10::IValue(model->config().to_text()));
  archive.write("epoch", torch::tensor(static_cast<int64_t>(epoch)));

  torch::serialize::OutputArchive weights;
  model->save(weights);
  archive.write("model", weights);

  archive.write("has_optimizer", torch::tensor(optimizer != nullptr));
  if (optimizer) {
    torch::serialize::OutputArchive opt;
    optimizer->save(opt);
    archive.write("optimizer", opt);
  }
  try {
    archive.save_to(path);
  } catch (const c10::Error& e) {
    throw Error(ErrorKind::Data, "cannot write checkpoint '" + path + "': " + e.what_without_backtrace());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  auto archive = open_archive(path);
  c10::IValue config_text;
  archive.read("config", config_text);
  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_text(config_text.toStringRef());
  ckpt.model = HRFNet(ckpt.config);

  torch::serialize::InputArchive weights;
  archive.read("model", weights);
  ckpt.model->load(weights);

  torch::Tensor epoch, has_opt;
  archive.read("epoch", epoch);
  archive.read("has_optimizer", has_opt);
  ckpt.epoch = static_cast<int>(epoch.item<int64_t>());
  ckpt.has_optimizer_state = has_opt.item<bool>();
  return ckpt;
}

void load_optimizer_state(const std::string& path, torch::optim::Adam& optimizer) {
  auto archive = open_archive(path);
  torch::serialize::InputArchive opt;
  if (!archive.try_read("optimizer", opt)) {
    throw Error(ErrorKind::Data, "checkpoint '" + path + "' holds no optimizer state");
  }
  optimizer.load(opt);
}

int load_matching_weights(const std::string& path, HRFNet& model) {
  Checkpoint src = load_checkpoint(path);
  torch::NoGradGuard guard;
  int copied = 0;
  auto copy_matching = [&](auto dst_items, auto src_items) {
    for (auto& item : dst_items) {
      const torch::Tensor* from = src_items.find(item.key());
      if (from && from->sizes() == item.value().sizes()) {
        item.value().copy_(*from);
        ++copied;
      }
    }
  };
  copy_matching(model->named_parameters(), src.model->named_parameters());
  copy_matching(model->named_buffers(), src.model->named_buffers());
  return copied;
}

}  // namespace hrfnet

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hrfnet/config.hpp"
#include "hrfnet/raster.hpp"
#include "hrfnet/srm.hpp"

namespace hrfnet {

// N x C x h x w activations plus their spatial reduction relative to the
// network input that produced them.
struct FeatureMap {
  torch::Tensor data;
  int stride = 1;

  int64_t channels() const { return data.size(1); }
  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

// Resizes the spatially smaller map to the larger one (bilinear, no corner
// alignment) and concatenates channels: a first, then b.
FeatureMap fuse(const FeatureMap& a, const FeatureMap& b);

// Bilinear resize without corner alignment; the tensor counterpart of downsample().
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width);

enum class Activation { None, ReLU, HardSwish };

class ConvBnActImpl : public torch::nn::Module {
 public:
  ConvBnActImpl(int in, int out, int kernel, int stride, Activation act, int groups = 1, int dilation = 1);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
  Activation act_;
};
TORCH_MODULE(ConvBnAct);

class SqueezeExciteImpl : public torch::nn::Module {
 public:
  SqueezeExciteImpl(int channels, int squeeze);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d reduce{nullptr}, expand{nullptr};
};
TORCH_MODULE(SqueezeExcite);

class InvertedResidualImpl : public torch::nn::Module {
 public:
  InvertedResidualImpl(int in, int expand, int out, int kernel, int stride, bool se, bool hard_swish);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvBnAct expand_conv{nullptr};
  ConvBnAct depthwise{nullptr};
  SqueezeExcite squeeze{nullptr};
  ConvBnAct project{nullptr};
  bool residual_;
};
TORCH_MODULE(InvertedResidual);

// Lightweight full-resolution branch (MobileNet-v3 stages up to stride 8).
class ShallowBackboneImpl : public torch::nn::Module {
 public:
  ShallowBackboneImpl(const ModelConfig& cfg, int in_channels);

  struct Output {
    FeatureMap low_level;  // stride 4
    FeatureMap features;   // stride 8
  };
  Output forward(const torch::Tensor& x);

  int out_channels() const { return out_channels_; }
  int low_level_channels() const { return low_level_channels_; }

 private:
  ConvBnAct stem{nullptr};
  torch::nn::ModuleList blocks;
  std::size_t low_level_index_ = 0;  // blocks[0..index] produce the stride-4 map
  int out_channels_ = 0;
  int low_level_channels_ = 0;
};
TORCH_MODULE(ShallowBackbone);

class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int in, int out, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvBnAct conv1{nullptr};
  ConvBnAct conv2{nullptr};
  ConvBnAct downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

// Deep branch on the downsampled input (ResNet-18, final stride-32 stage).
class DeepBackboneImpl : public torch::nn::Module {
 public:
  DeepBackboneImpl(const ModelConfig& cfg, int in_channels);
  FeatureMap forward(const torch::Tensor& x);
  int out_channels() const { return out_channels_; }

 private:
  ConvBnAct stem{nullptr};
  torch::nn::MaxPool2d pool{nullptr};
  torch::nn::Sequential layers{nullptr};
  Extent input_;
  int out_channels_ = 0;
};
TORCH_MODULE(DeepBackbone);

// conv3x3 -> ReLU -> conv3x3
class RefineImpl : public torch::nn::Module {
 public:
  RefineImpl(int in, int out);
  FeatureMap forward(const FeatureMap& f);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(Refine);

class AsppImpl : public torch::nn::Module {
 public:
  AsppImpl(int in, int out, const std::vector<int>& rates);
  FeatureMap forward(const FeatureMap& f);

  // Parallel branches including the image-pooling branch.
  std::size_t branch_count() const { return convs->size() + 1; }

 private:
  torch::nn::ModuleList convs;
  torch::nn::Conv2d pooled{nullptr};
  ConvBnAct project{nullptr};
};
TORCH_MODULE(Aspp);

class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(int context_channels, int low_level_in, int low_level_out, int mid, int classes);
  // Returns logits at the low-level map's resolution; the caller upsamples.
  torch::Tensor forward(const FeatureMap& context, const FeatureMap& low_level);

 private:
  ConvBnAct reduce{nullptr};
  ConvBnAct fuse1{nullptr}, fuse2{nullptr};
  torch::nn::Conv2d classifier{nullptr};
};
TORCH_MODULE(Decoder);

// The four-branch forgery localization network.
class HRFNetImpl : public torch::nn::Module {
 public:
  explicit HRFNetImpl(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const FilterBank& filter_bank() const { return bank_; }

  // images: N x 3 x H x W, raw 8-bit scale [0, 255]. H x W must equal the
  // configured full resolution, or round up to it at the next multiple of 32
  // (reflect-padded internally and centre-cropped back).
  // Returns N x 2 x H x W logits (channel 0 pristine, 1 tampered).
  torch::Tensor forward(const torch::Tensor& images);

  // Network body on prepared inputs at the configured resolutions.
  torch::Tensor forward_inputs(const torch::Tensor& rgb_full, const torch::Tensor& rgb_down,
                               const torch::Tensor& srm_full, const torch::Tensor& srm_down);

  // Fixed SRM residuals of N x 3 x H x W [0, 255] images, via convolution.
  torch::Tensor residuals(const torch::Tensor& images) const;

  // Parameters of the shallow/deep SRM branches and their refinement.
  std::vector<torch::Tensor> srm_branch_parameters();
  void zero_srm_branches();

  ShallowBackbone shallow_rgb{nullptr}, shallow_srm{nullptr};
  DeepBackbone deep_rgb{nullptr}, deep_srm{nullptr};
  Refine refine_rgb{nullptr}, refine_srm{nullptr};
  Aspp aspp{nullptr};
  Decoder decoder{nullptr};

 private:
  ModelConfig cfg_;
  FilterBank bank_;
  torch::Tensor srm_weight_;
  torch::Tensor srm_divisor_;
};
TORCH_MODULE(HRFNet);

// Deterministic (seeded, generator-local) initialization of every conv / BN.
void initialize_weights(torch::nn::Module& module, std::uint64_t seed);

int64_t parameter_count(torch::nn::Module& module);

// 1 x 3 x H x W float tensor in [0, 255].
torch::Tensor image_to_tensor(const Image& image);
// N x H x W int64 class targets.
torch::Tensor mask_to_tensor(const Mask& mask);
ProbabilityMap tensor_to_probability(const torch::Tensor& prob_hw);

struct Prediction {
  ProbabilityMap probability;  // softmax tampered-class probability
  Mask mask;                   // probability >= threshold
};

// Gradient-free batch-1 inference. threshold must lie in (0, 1).
Prediction predict_mask(HRFNet& model, const Image& image, double threshold = 0.5);
Prediction threshold_logits(const torch::Tensor& logits_2hw, double threshold);

}  // namespace hrfnet

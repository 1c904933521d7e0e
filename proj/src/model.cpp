#include "hrfnet/model.hpp"

#include <cmath>
#include <cstring>

#include "hrfnet/error.hpp"

namespace hrfnet {
namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2dOptions conv_options(int in, int out, int kernel, int stride = 1, int dilation = 1,
                                      int groups = 1, bool bias = false) {
  // atrous (ASPP) convs pad by edge replication: a spatially constant map stays
  // constant instead of picking up zero-padding borders
  return torch::nn::Conv2dOptions(in, out, kernel)
      .stride(stride)
      .padding(dilation * (kernel / 2))
      .padding_mode(dilation > 1 ? torch::nn::detail::conv_padding_mode_t(torch::kReplicate)
                                 : torch::nn::detail::conv_padding_mode_t(torch::kZeros))
      .dilation(dilation)
      .groups(groups)
      .bias(bias);
}

std::string shape_string(const torch::Tensor& t) {
  std::string s;
  for (int64_t i = 0; i < t.dim(); ++i) s += (i ? "x" : "") + std::to_string(t.size(i));
  return s;
}

void require_4d(const torch::Tensor& t, int64_t channels, const char* who) {
  if (t.dim() != 4 || t.size(1) != channels) {
    throw Error(ErrorKind::Shape, std::string(who) + ": expected N x " + std::to_string(channels) +
                                      " x H x W input, got " + shape_string(t));
  }
}

}  // namespace

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

FeatureMap fuse(const FeatureMap& a, const FeatureMap& b) {
  const int64_t area_a = a.height() * a.width();
  const int64_t area_b = b.height() * b.width();
  const int64_t h = area_a >= area_b ? a.height() : b.height();
  const int64_t w = area_a >= area_b ? a.width() : b.width();
  return {torch::cat({resize_bilinear(a.data, h, w), resize_bilinear(b.data, h, w)}, 1),
          std::min(a.stride, b.stride)};
}

// ---------------------------------------------------------------------------

ConvBnActImpl::ConvBnActImpl(int in, int out, int kernel, int stride, Activation act, int groups, int dilation)
    : conv(conv_options(in, out, kernel, stride, dilation, groups)), bn(out), act_(act) {
  register_module("conv", conv);
  register_module("bn", bn);
}

torch::Tensor ConvBnActImpl::forward(const torch::Tensor& x) {
  auto y = bn(conv(x));
  switch (act_) {
    case Activation::ReLU:
      return torch::relu(y);
    case Activation::HardSwish:
      return torch::hardswish(y);
    case Activation::None:
      break;
  }
  return y;
}

SqueezeExciteImpl::SqueezeExciteImpl(int channels, int squeeze)
    : reduce(conv_options(channels, squeeze, 1, 1, 1, 1, true)),
      expand(conv_options(squeeze, channels, 1, 1, 1, 1, true)) {
  register_module("reduce", reduce);
  register_module("expand", expand);
}

torch::Tensor SqueezeExciteImpl::forward(const torch::Tensor& x) {
  auto s = x.mean({2, 3}, /*keepdim=*/true);
  s = torch::hardsigmoid(expand(torch::relu(reduce(s))));
  return x * s;
}

InvertedResidualImpl::InvertedResidualImpl(int in, int expand, int out, int kernel, int stride, bool se,
                                           bool hard_swish)
    : residual_(stride == 1 && in == out) {
  const Activation act = hard_swish ? Activation::HardSwish : Activation::ReLU;
  if (expand != in) expand_conv = register_module("expand", ConvBnAct(in, expand, 1, 1, act));
  depthwise = register_module("depthwise", ConvBnAct(expand, expand, kernel, stride, act, expand));
  if (se) squeeze = register_module("se", SqueezeExcite(expand, std::max(8, expand / 4)));
  project = register_module("project", ConvBnAct(expand, out, 1, 1, Activation::None));
}

torch::Tensor InvertedResidualImpl::forward(const torch::Tensor& x) {
  auto y = expand_conv ? expand_conv(x) : x;
  y = depthwise(y);
  if (squeeze) y = squeeze(y);
  y = project(y);
  return residual_ ? y + x : y;
}

// ---------------------------------------------------------------------------

ShallowBackboneImpl::ShallowBackboneImpl(const ModelConfig& cfg, int in_channels) {
  int ch = cfg.scaled(cfg.shallow_stem);
  stem = register_module("stem", ConvBnAct(in_channels, ch, 3, 2, Activation::HardSwish));
  int stride = 2;
  for (std::size_t i = 0; i < cfg.shallow_blocks.size(); ++i) {
    const auto& b = cfg.shallow_blocks[i];
    const int out = cfg.scaled(b.out);
    blocks->push_back(InvertedResidual(ch, cfg.scaled(b.expand), out, b.kernel, b.stride, b.squeeze_excite,
                                       b.hard_swish));
    ch = out;
    stride *= b.stride;
    if (stride == 4) {
      low_level_index_ = i;
      low_level_channels_ = ch;
    }
  }
  out_channels_ = ch;
  register_module("blocks", blocks);
}

ShallowBackboneImpl::Output ShallowBackboneImpl::forward(const torch::Tensor& x) {
  auto y = stem(x);
  torch::Tensor low;
  for (std::size_t i = 0; i < blocks->size(); ++i) {
    y = blocks[i]->as<InvertedResidual>()->forward(y);
    if (i == low_level_index_) low = y;
  }
  return {{low, 4}, {y, 8}};
}

BasicBlockImpl::BasicBlockImpl(int in, int out, int stride)
    : conv1(in, out, 3, stride, Activation::ReLU), conv2(out, out, 3, 1, Activation::None) {
  register_module("conv1", conv1);
  register_module("conv2", conv2);
  if (stride != 1 || in != out) {
    downsample = register_module("downsample", ConvBnAct(in, out, 1, stride, Activation::None));
  }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
  auto y = conv2(conv1(x));
  return torch::relu(y + (downsample ? downsample(x) : x));
}

DeepBackboneImpl::DeepBackboneImpl(const ModelConfig& cfg, int in_channels) : input_(cfg.deep_input) {
  int ch = cfg.scaled(cfg.deep_stem);
  stem = register_module("stem", ConvBnAct(in_channels, ch, 7, 2, Activation::ReLU));
  pool = register_module("pool", torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));
  layers = torch::nn::Sequential();
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const int out = cfg.scaled(cfg.deep_widths[stage]);
    for (int b = 0; b < cfg.deep_blocks[stage]; ++b) {
      layers->push_back(BasicBlock(ch, out, (b == 0 && stage > 0) ? 2 : 1));
      ch = out;
    }
  }
  out_channels_ = ch;
  register_module("layers", layers);
}

FeatureMap DeepBackboneImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(2) != input_.height || x.size(3) != input_.width) {
    throw Error(ErrorKind::Shape, "deep branch: expected " + format_extent(input_) + " input, got " +
                                      shape_string(x));
  }
  return {layers->forward(pool(stem(x))), 32};
}

RefineImpl::RefineImpl(int in, int out)
    : conv1(conv_options(in, out, 3, 1, 1, 1, true)), conv2(conv_options(out, out, 3, 1, 1, 1, true)) {
  register_module("conv1", conv1);
  register_module("conv2", conv2);
}

FeatureMap RefineImpl::forward(const FeatureMap& f) {
  return {conv2(torch::relu(conv1(f.data))), f.stride};
}

AsppImpl::AsppImpl(int in, int out, const std::vector<int>& rates) {
  for (int r : rates) {
    // rate 1 is the pointwise branch
    convs->push_back(r == 1 ? ConvBnAct(in, out, 1, 1, Activation::ReLU)
                            : ConvBnAct(in, out, 3, 1, Activation::ReLU, 1, r));
  }
  register_module("convs", convs);
  pooled = register_module("pooled", torch::nn::Conv2d(conv_options(in, out, 1, 1, 1, 1, true)));
  project = register_module(
      "project", ConvBnAct(out * static_cast<int>(rates.size() + 1), out, 1, 1, Activation::ReLU));
}

FeatureMap AsppImpl::forward(const FeatureMap& f) {
  const auto& x = f.data;
  std::vector<torch::Tensor> outs;
  outs.reserve(convs->size() + 1);
  for (const auto& m : *convs) outs.push_back(m->as<ConvBnAct>()->forward(x));
  auto g = torch::relu(pooled(x.mean({2, 3}, /*keepdim=*/true)));
  outs.push_back(g.expand({-1, -1, x.size(2), x.size(3)}));
  return {project(torch::cat(outs, 1)), f.stride};
}

DecoderImpl::DecoderImpl(int context_channels, int low_level_in, int low_level_out, int mid, int classes)
    : reduce(low_level_in, low_level_out, 1, 1, Activation::ReLU),
      fuse1(context_channels + low_level_out, mid, 3, 1, Activation::ReLU),
      fuse2(mid, mid, 3, 1, Activation::ReLU),
      classifier(conv_options(mid, classes, 1, 1, 1, 1, true)) {
  register_module("reduce", reduce);
  register_module("fuse1", fuse1);
  register_module("fuse2", fuse2);
  register_module("classifier", classifier);
}

torch::Tensor DecoderImpl::forward(const FeatureMap& context, const FeatureMap& low_level) {
  auto up = resize_bilinear(context.data, low_level.height(), low_level.width());
  auto y = torch::cat({up, reduce(low_level.data)}, 1);
  return classifier(fuse2(fuse1(y)));
}

// ---------------------------------------------------------------------------

HRFNetImpl::HRFNetImpl(ModelConfig cfg) : cfg_(std::move(cfg)), bank_(srm_kernels()) {
  cfg_.validate();
  const int fc = cfg_.scaled(cfg_.fusion_channels);
  const int k = cfg_.srm_channels();

  shallow_rgb = register_module("shallow_rgb", ShallowBackbone(cfg_, 3));
  deep_rgb = register_module("deep_rgb", DeepBackbone(cfg_, 3));
  refine_rgb = register_module(
      "refine_rgb", Refine(shallow_rgb->out_channels() + deep_rgb->out_channels(), fc));
  if (cfg_.use_srm) {
    shallow_srm = register_module("shallow_srm", ShallowBackbone(cfg_, k));
    deep_srm = register_module("deep_srm", DeepBackbone(cfg_, k));
    refine_srm = register_module(
        "refine_srm", Refine(shallow_srm->out_channels() + deep_srm->out_channels(), fc));
  }
  aspp = register_module("aspp", Aspp(cfg_.use_srm ? 2 * fc : fc, fc, cfg_.aspp_rates));
  decoder = register_module("decoder", Decoder(fc, shallow_rgb->low_level_channels(),
                                               cfg_.scaled(cfg_.low_level_channels), fc, cfg_.num_classes));

  // fixed SRM bank as a (non-trainable) convolution
  const int side = bank_.max_side();
  const int planes = cfg_.per_channel_srm ? 3 : 1;
  const double lum[3] = {0.299, 0.587, 0.114};
  auto weight = torch::zeros({k, 3, side, side}, torch::kDouble);
  auto divisor = torch::zeros({1, k, 1, 1}, torch::kDouble);
  auto wa = weight.accessor<double, 4>();
  auto da = divisor.accessor<double, 4>();
  for (std::size_t ki = 0; ki < bank_.kernels.size(); ++ki) {
    const auto& kern = bank_.kernels[ki];
    const int off = (side - kern.side) / 2;
    for (int p = 0; p < planes; ++p) {
      const int oc = static_cast<int>(ki) * planes + p;
      da[0][oc][0][0] = kern.divisor;
      for (int c = 0; c < 3; ++c) {
        const double gain = cfg_.per_channel_srm ? (c == p ? 1.0 : 0.0) : lum[c];
        if (gain == 0.0) continue;
        for (int i = 0; i < kern.side; ++i) {
          for (int j = 0; j < kern.side; ++j) {
            wa[oc][c][off + i][off + j] =
                gain * kern.coefficients[i * kern.side + j];
          }
        }
      }
    }
  }
  srm_weight_ = register_buffer("srm_weight", weight.to(torch::kFloat));
  srm_divisor_ = register_buffer("srm_divisor", divisor.to(torch::kFloat));

  initialize_weights(*this, cfg_.seed);
}

torch::Tensor HRFNetImpl::residuals(const torch::Tensor& images) const {
  require_4d(images, 3, "srm");
  const int64_t pad = bank_.max_side() / 2;
  auto padded = F::pad(images, F::PadFuncOptions({pad, pad, pad, pad}).mode(torch::kReflect));
  auto w = srm_weight_.to(images.scalar_type());
  auto d = srm_divisor_.to(images.scalar_type());
  const double t = bank_.truncation_threshold;
  return torch::clamp(F::conv2d(padded, w) / d, -t, t);
}

torch::Tensor HRFNetImpl::forward_inputs(const torch::Tensor& rgb_full, const torch::Tensor& rgb_down,
                                         const torch::Tensor& srm_full, const torch::Tensor& srm_down) {
  const auto rgb_shallow = shallow_rgb(rgb_full);
  FeatureMap fused = refine_rgb(fuse(rgb_shallow.features, deep_rgb(rgb_down)));
  if (cfg_.use_srm) {
    const auto srm_shallow = shallow_srm(srm_full);
    const FeatureMap srm = refine_srm(fuse(srm_shallow.features, deep_srm(srm_down)));
    fused = fuse(fused, srm);
  }
  auto logits = decoder(aspp(fused), rgb_shallow.low_level);
  return resize_bilinear(logits, rgb_full.size(2), rgb_full.size(3));
}

torch::Tensor HRFNetImpl::forward(const torch::Tensor& images) {
  require_4d(images, 3, "hrfnet");
  const int64_t h = images.size(2);
  const int64_t w = images.size(3);
  const int64_t H = cfg_.full_res.height;
  const int64_t W = cfg_.full_res.width;
  auto round32 = [](int64_t v) { return (v + 31) / 32 * 32; };
  if (round32(h) != H || round32(w) != W) {
    throw Error(ErrorKind::Shape, "hrfnet: input " + shape_string(images) +
                                      " does not match configured resolution " + format_extent(cfg_.full_res));
  }

  torch::Tensor x = images;
  const int64_t top = (H - h) / 2, left = (W - w) / 2;
  if (h != H || w != W) {
    x = F::pad(images, F::PadFuncOptions({left, W - w - left, top, H - h - top}).mode(torch::kReflect));
  }

  auto rgb_full = x / 255.0;
  auto rgb_down = resize_bilinear(rgb_full, cfg_.deep_input.height, cfg_.deep_input.width);
  torch::Tensor srm_full, srm_down;
  if (cfg_.use_srm) {
    srm_full = residuals(x);
    srm_down = resize_bilinear(srm_full, cfg_.deep_input.height, cfg_.deep_input.width);
  }
  auto logits = forward_inputs(rgb_full, rgb_down, srm_full, srm_down);
  if (h != H || w != W) logits = logits.slice(2, top, top + h).slice(3, left, left + w);
  return logits;
}

std::vector<torch::Tensor> HRFNetImpl::srm_branch_parameters() {
  std::vector<torch::Tensor> params;
  if (!cfg_.use_srm) return params;
  for (torch::nn::Module* m : {static_cast<torch::nn::Module*>(shallow_srm.get()),
                               static_cast<torch::nn::Module*>(deep_srm.get()),
                               static_cast<torch::nn::Module*>(refine_srm.get())}) {
    for (auto& p : m->parameters()) params.push_back(p);
  }
  return params;
}

void HRFNetImpl::zero_srm_branches() {
  torch::NoGradGuard guard;
  for (auto& p : srm_branch_parameters()) p.zero_();
}

// ---------------------------------------------------------------------------

void initialize_weights(torch::nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard guard;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  // include_self would need shared_from_this, unavailable inside a constructor
  std::vector<torch::nn::Module*> all{&module};
  for (const auto& m : module.modules(/*include_self=*/false)) all.push_back(m.get());
  for (auto* m : all) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      const auto& w = conv->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      const double bound = 1.0 / std::sqrt(fan_in);
      auto fresh = torch::empty(w.sizes(), torch::kDouble).uniform_(-bound, bound, gen);
      w.copy_(fresh);
      if (conv->bias.defined()) {
        conv->bias.copy_(torch::empty(conv->bias.sizes(), torch::kDouble).uniform_(-bound, bound, gen));
      }
    } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
      bn->running_mean.zero_();
      bn->running_var.fill_(1.0);
    }
  }
}

int64_t parameter_count(torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

torch::Tensor image_to_tensor(const Image& image) {
  if (image.channels() != 3) {
    throw Error(ErrorKind::Channels, "expected a 3-channel image, got " + std::to_string(image.channels()));
  }
  auto t = torch::from_blob(const_cast<std::uint8_t*>(image.data()), {image.height(), image.width(), 3},
                            torch::kUInt8);
  return t.permute({2, 0, 1}).unsqueeze(0).to(torch::kFloat).contiguous();
}

torch::Tensor mask_to_tensor(const Mask& mask) {
  if (mask.channels() != 1) throw Error(ErrorKind::Channels, "mask must have one channel");
  auto t = torch::from_blob(const_cast<std::uint8_t*>(mask.data()), {1, mask.height(), mask.width()},
                            torch::kUInt8);
  return t.to(torch::kLong);
}

ProbabilityMap tensor_to_probability(const torch::Tensor& prob_hw) {
  auto t = prob_hw.detach().to(torch::kFloat).contiguous();
  ProbabilityMap out(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), 1);
  std::memcpy(out.data(), t.data_ptr<float>(), out.size() * sizeof(float));
  return out;
}

Prediction threshold_logits(const torch::Tensor& logits_2hw, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::Usage, "threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  auto prob = torch::softmax(logits_2hw.to(torch::kDouble), 0)[1];
  Prediction p{tensor_to_probability(prob), Mask(static_cast<int>(prob.size(0)), static_cast<int>(prob.size(1)), 1)};
  auto pa = prob.accessor<double, 2>();
  for (int y = 0; y < p.mask.height(); ++y) {
    for (int x = 0; x < p.mask.width(); ++x) p.mask.at(y, x) = pa[y][x] >= threshold ? 1 : 0;
  }
  return p;
}

Prediction predict_mask(HRFNet& model, const Image& image, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::Usage, "threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  torch::NoGradGuard guard;
  const bool was_training = model->is_training();
  model->eval();
  auto logits = model->forward(image_to_tensor(image))[0];
  if (was_training) model->train();
  return threshold_logits(logits, threshold);
}

}  // namespace hrfnet

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "hrfnet/checkpoint.hpp"
#include "hrfnet/model.hpp"
#include "hrfnet/train.hpp"
#include "support.hpp"

using namespace hrfnet;
using namespace testing_support;

namespace {

ModelConfig tiny(int size) {
  auto cfg = ModelConfig::desk(size, 0.03);
  cfg.deep_blocks = {1, 1, 1, 1};
  return cfg;
}

torch::Tensor random_batch(int n, int h, int w, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randint(0, 256, {n, 3, h, w}, gen, torch::kFloat);
}

}  // namespace

TEST(Fuse, ResizesSmallerAndConcatenates) {
  FeatureMap a{torch::randn({1, 64, 128, 128}), 8};
  FeatureMap b{torch::randn({1, 512, 7, 7}), 32};
  const auto f = fuse(a, b);
  EXPECT_EQ(f.data.sizes(), (std::vector<int64_t>{1, 576, 128, 128}));
  EXPECT_EQ(f.stride, 8);
  EXPECT_TRUE(torch::equal(f.data.slice(1, 0, 64), a.data));
}

TEST(Fuse, SelfFusionDuplicates) {
  FeatureMap a{torch::randn({2, 5, 9, 9}), 4};
  const auto f = fuse(a, a);
  EXPECT_EQ(f.channels(), 10);
  EXPECT_TRUE(torch::equal(f.data.slice(1, 0, 5), a.data));
  EXPECT_TRUE(torch::equal(f.data.slice(1, 5, 10), a.data));
}

TEST(Fuse, SwappingArgumentsPermutesChannelBlocks) {
  FeatureMap a{torch::randn({1, 3, 16, 16}), 8};
  FeatureMap b{torch::randn({1, 4, 4, 4}), 32};
  const auto ab = fuse(a, b), ba = fuse(b, a);
  EXPECT_TRUE(torch::equal(ab.data.slice(1, 0, 3), ba.data.slice(1, 4, 7)));
  EXPECT_TRUE(torch::equal(ab.data.slice(1, 3, 7), ba.data.slice(1, 0, 4)));
  EXPECT_EQ(ab.stride, ba.stride);
}

TEST(ResizeBilinear, MatchesRasterDownsample) {
  std::mt19937_64 rng(4);
  const auto img = random_image(20, 24, rng);
  const auto t = image_to_tensor(img).to(torch::kDouble);
  const auto r = resize_bilinear(t, 7, 9);
  const auto ref = downsample(img, {7, 9});
  auto acc = r.accessor<double, 4>();
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(acc[0][c][y][x], ref.at(y, x, c), 1e-4);
}

TEST(ShallowBackbone, StrideEightFeaturesAndStrideFourSkip) {
  ModelConfig cfg;
  cfg.width_multiplier = 0.125;
  ShallowBackbone net(cfg, 3);
  net->eval();
  torch::NoGradGuard ng;
  const auto out = net->forward(torch::rand({1, 3, 224, 224}));
  EXPECT_EQ(out.features.height(), 28);
  EXPECT_EQ(out.features.width(), 28);
  EXPECT_EQ(out.features.stride, 8);
  EXPECT_EQ(out.features.channels(), net->out_channels());
  EXPECT_EQ(out.low_level.height(), 56);
  EXPECT_EQ(out.low_level.stride, 4);
  const auto big = net->forward(torch::rand({1, 3, 1024, 1024}));
  EXPECT_EQ(big.features.height(), 128);
  EXPECT_EQ(big.features.width(), 128);
}

TEST(ShallowBackbone, DeterministicForward) {
  ModelConfig cfg;
  cfg.width_multiplier = 0.125;
  ShallowBackbone net(cfg, 9);
  initialize_weights(*net, 3);
  net->eval();
  torch::NoGradGuard ng;
  const auto x = torch::rand({1, 9, 64, 64});
  EXPECT_TRUE(torch::equal(net->forward(x).features.data, net->forward(x).features.data));
}

TEST(DeepBackbone, StrideThirtyTwo) {
  ModelConfig cfg;
  cfg.width_multiplier = 0.125;
  DeepBackbone net(cfg, 3);
  net->eval();
  torch::NoGradGuard ng;
  const auto f = net->forward(torch::rand({1, 3, 224, 224}));
  EXPECT_EQ(f.height(), 7);
  EXPECT_EQ(f.width(), 7);
  EXPECT_EQ(f.stride, 32);

  auto desk = ModelConfig::desk(128, 0.125);
  DeepBackbone small(desk, 3);
  small->eval();
  EXPECT_EQ(small->forward(torch::rand({1, 3, 96, 96})).height(), 3);
  const auto z = small->forward(torch::zeros({1, 3, 96, 96}));
  EXPECT_TRUE(torch::isfinite(z.data).all().item<bool>());
}

TEST(DeepBackbone, WrongInputSizeIsShapeError) {
  ModelConfig cfg;
  cfg.width_multiplier = 0.125;
  DeepBackbone net(cfg, 3);
  try {
    net->forward(torch::rand({1, 3, 96, 96}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Refine, ReluGatesNegativePreActivation) {
  Refine r(12, 8);
  {
    torch::NoGradGuard ng;
    r->conv1->weight.zero_();
    r->conv1->bias.fill_(-1.0);
  }
  const auto out = r->forward({torch::randn({1, 12, 10, 6}), 8});
  EXPECT_EQ(out.data.sizes(), (std::vector<int64_t>{1, 8, 10, 6}));
  const auto bias_map = r->conv2->bias.view({1, 8, 1, 1}).expand({1, 8, 10, 6});
  EXPECT_TRUE(torch::equal(out.data, bias_map));
}

TEST(Refine, PreservesSpatialDimsAndProjects) {
  Refine r(40, 16);
  for (int s : {1, 5, 17}) {
    const auto out = r->forward({torch::randn({2, 40, s, s + 2}), 8});
    EXPECT_EQ(out.data.sizes(), (std::vector<int64_t>{2, 16, s, s + 2}));
  }
}

TEST(Aspp, FiveBranchesForDefaultRates) {
  Aspp a(16, 8, std::vector<int>{1, 6, 12, 18});
  EXPECT_EQ(a->branch_count(), 5u);
  EXPECT_EQ(Aspp(16, 8, std::vector<int>{1, 2})->branch_count(), 3u);
}

TEST(Aspp, ConstantInputGivesSpatiallyConstantOutput) {
  Aspp a(6, 8, std::vector<int>{1, 6, 12, 18});
  initialize_weights(*a, 5);
  a->eval();
  torch::NoGradGuard ng;
  const auto out = a->forward({torch::full({1, 6, 16, 16}, 0.7), 8}).data;
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 8, 16, 16}));
  const auto ref = out.select(2, 0).select(2, 0).view({1, 8, 1, 1});
  EXPECT_TRUE(torch::allclose(out, ref.expand_as(out), 0.0, 1e-6));
}

TEST(Aspp, PreservesDimsDownToOnePixel) {
  Aspp a(6, 8, std::vector<int>{1, 6, 12, 18});
  a->eval();
  for (int s : {1, 3, 20}) EXPECT_EQ(a->forward({torch::randn({1, 6, s, s}), 8}).data.size(2), s);
}

TEST(HRFNet, FullResolutionLogits) {
  auto cfg = ModelConfig::desk(256, 0.25);
  HRFNet net(cfg);
  net->eval();
  torch::NoGradGuard ng;
  const auto logits = net->forward(random_batch(1, 256, 256, 1));
  EXPECT_EQ(logits.sizes(), (std::vector<int64_t>{1, 2, 256, 256}));
  EXPECT_TRUE(torch::isfinite(logits).all().item<bool>());
}

TEST(HRFNet, PadsAndCropsToTheNextMultipleOf32) {
  HRFNet net(tiny(128));
  net->eval();
  torch::NoGradGuard ng;
  EXPECT_EQ(net->forward(random_batch(1, 100, 100, 2)).sizes(), (std::vector<int64_t>{1, 2, 100, 100}));
  EXPECT_THROW(net->forward(random_batch(1, 64, 64, 2)), Error);
  EXPECT_THROW(net->forward(torch::rand({1, 4, 128, 128})), Error);
}

TEST(HRFNet, FourBranchesDoNotShareWeights) {
  HRFNet net(tiny(64));
  std::set<const void*> storages;
  std::size_t total = 0;
  for (const auto& p : net->parameters()) {
    storages.insert(p.data_ptr());
    ++total;
  }
  EXPECT_EQ(storages.size(), total);
  EXPECT_NE(net->shallow_rgb.get(), net->shallow_srm.get());
  EXPECT_NE(net->deep_rgb.get(), net->deep_srm.get());
}

TEST(HRFNet, SrmStageMatchesApplySrm) {
  std::mt19937_64 rng(8);
  const auto img = random_image(64, 64, rng);
  HRFNet net(tiny(64));
  const auto r = net->residuals(image_to_tensor(img).to(torch::kDouble));
  const auto ref = apply_srm(img, srm_kernels());
  auto acc = r.accessor<double, 4>();
  double worst = 0.0;
  for (int c = 0; c < 9; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) worst = std::max(worst, std::abs(acc[0][c][y][x] - ref.at(y, x, c)));
  EXPECT_LE(worst, 1e-5);
}

TEST(HRFNet, ZeroedSrmBranchesIgnoreResidualInput) {
  HRFNet net(tiny(64));
  net->zero_srm_branches();
  net->eval();
  torch::NoGradGuard ng;
  const auto rgb = torch::rand({1, 3, 64, 64}) * 255;
  const auto rgb_down = resize_bilinear(rgb, 64, 64);
  const auto a = net->forward_inputs(rgb, rgb_down, torch::randn({1, 9, 64, 64}), torch::randn({1, 9, 64, 64}));
  const auto b = net->forward_inputs(rgb, rgb_down, torch::zeros({1, 9, 64, 64}), torch::zeros({1, 9, 64, 64}));
  EXPECT_TRUE(torch::equal(a, b));
  for (const auto& p : net->srm_branch_parameters()) EXPECT_EQ(p.abs().sum().item<double>(), 0.0);
}

TEST(HRFNet, RgbOnlyVariantHasNoSrmBranches) {
  auto cfg = tiny(64);
  cfg.use_srm = false;
  HRFNet rgb_only(cfg);
  HRFNet dual(tiny(64));
  EXPECT_LT(parameter_count(*rgb_only), parameter_count(*dual));
  EXPECT_TRUE(rgb_only->srm_branch_parameters().empty());
  EXPECT_EQ(rgb_only->forward(random_batch(1, 64, 64, 3)).size(1), 2);
}

TEST(HRFNet, DeterministicUnderFixedSeed) {
  HRFNet a(tiny(64)), b(tiny(64));
  a->eval();
  b->eval();
  torch::NoGradGuard ng;
  const auto x = random_batch(1, 64, 64, 5);
  EXPECT_TRUE(torch::equal(a->forward(x), a->forward(x)));
  EXPECT_TRUE(torch::equal(a->forward(x), b->forward(x)));
  auto cfg = tiny(64);
  cfg.seed = 1;
  HRFNet c(cfg);
  c->eval();
  EXPECT_FALSE(torch::equal(a->forward(x), c->forward(x)));
}

TEST(HRFNet, GradientsAreFinite) {
  HRFNet net(tiny(64));
  net->train();
  net->forward(random_batch(2, 64, 64, 6)).sum().backward();
  for (const auto& p : net->parameters()) {
    ASSERT_TRUE(p.grad().defined());
    EXPECT_TRUE(torch::isfinite(p.grad()).all().item<bool>());
  }
}

// Small steps keep the difference quotient on one side of every ReLU and
// max-pool switch, so agreement should be tight.
TEST(HRFNet, GradientsMatchFiniteDifferences) {
  HRFNet net(tiny(64));
  net->to(torch::kDouble);
  net->train();
  const auto x = random_batch(2, 64, 64, 8).to(torch::kDouble);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(9);
  const auto t = torch::randint(0, 2, {2, 64, 64}, gen, torch::kLong);
  auto loss = [&] { return weighted_ce(net->forward(x), t, 10.0); };
  loss().backward();

  auto params = net->parameters();
  std::mt19937_64 rng(4);
  torch::NoGradGuard ng;
  const double eps = 1e-6;
  for (int k = 0; k < 30; ++k) {
    auto& p = params[rng() % params.size()];
    const int64_t i = static_cast<int64_t>(rng() % p.numel());
    auto flat = p.view(-1);
    const double orig = flat[i].item<double>();
    flat[i] = orig + eps;
    const double up = loss().item<double>();
    flat[i] = orig - eps;
    const double down = loss().item<double>();
    flat[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double analytic = p.grad().view(-1)[i].item<double>();
    EXPECT_LE(std::abs(analytic - numeric), 1e-5 * std::max({std::abs(analytic), std::abs(numeric), 1e-6}))
        << "param " << k << ": " << analytic << " vs " << numeric;
  }
}

TEST(PredictMask, ThresholdHalfIsArgmax) {
  const auto logits = torch::randn({2, 16, 16});
  const auto p = threshold_logits(logits, 0.5);
  const auto arg = logits.argmax(0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) EXPECT_EQ(p.mask.at(y, x), arg[y][x].item<int64_t>()) << y << "," << x;
}

TEST(PredictMask, ShiftInvarianceAndNormalization) {
  const auto logits = torch::randn({2, 12, 12}) * 4;
  const auto a = threshold_logits(logits, 0.5);
  const auto b = threshold_logits(logits + 17.0, 0.5);
  EXPECT_EQ(a.mask, b.mask);
  const auto probs = torch::softmax(logits.to(torch::kDouble), 0);
  EXPECT_TRUE(torch::allclose(probs.sum(0), torch::ones({12, 12}, torch::kDouble), 0.0, 1e-6));
  for (float v : a.probability.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(PredictMask, ThresholdNearOneIsAllPristine) {
  const auto p = threshold_logits(torch::randn({2, 8, 8}), 1.0 - 1e-12);
  EXPECT_EQ(count_nonzero(p.mask), 0u);
}

TEST(PredictMask, RejectsThresholdOutsideOpenInterval) {
  HRFNet net(tiny(64));
  std::mt19937_64 rng(1);
  const auto img = random_image(64, 64, rng);
  for (double t : {0.0, 1.0, -0.5, 2.0}) {
    try {
      predict_mask(net, img, t);
      FAIL() << t;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Usage);
    }
  }
  const auto p = predict_mask(net, img, 0.5);
  EXPECT_EQ(p.mask.height(), 64);
  EXPECT_EQ(p.probability.width(), 64);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  HRFNet net(tiny(64));
  // move BN statistics away from their defaults
  net->train();
  {
    torch::NoGradGuard ng;
    net->forward(random_batch(2, 64, 64, 9));
  }
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-3));
  weighted_ce(net->forward(random_batch(1, 64, 64, 10)), torch::zeros({1, 64, 64}, torch::kLong), 10.0).backward();
  opt.step();
  save_checkpoint(dir / "c.pt", net, 7, &opt);

  auto ck = load_checkpoint(dir / "c.pt");
  EXPECT_EQ(ck.epoch, 7);
  EXPECT_TRUE(ck.has_optimizer_state);
  EXPECT_EQ(ck.config, net->config());
  net->eval();
  ck.model->eval();
  torch::NoGradGuard ng;
  const auto x = random_batch(1, 64, 64, 11);
  EXPECT_TRUE(torch::equal(net->forward(x), ck.model->forward(x)));

  torch::optim::Adam opt2(ck.model->parameters(), torch::optim::AdamOptions(1e-3));
  EXPECT_NO_THROW(load_optimizer_state(dir / "c.pt", opt2));
}

TEST(Checkpoint, MissingOrForeignFileIsDataError) {
  TempDir dir;
  try {
    load_checkpoint(dir / "absent.pt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
  std::ofstream(dir / "junk.pt") << "not an archive";
  EXPECT_THROW(load_checkpoint(dir / "junk.pt"), Error);
}

TEST(Checkpoint, MatchingWeightsInitializeAnotherModel) {
  TempDir dir;
  HRFNet src(tiny(64));
  save_checkpoint(dir / "src.pt", src, 1);
  auto cfg = tiny(64);
  cfg.seed = 42;
  HRFNet dst(cfg);
  const int copied = load_matching_weights(dir / "src.pt", dst);
  EXPECT_GT(copied, 0);
  const auto a = src->named_parameters();
  const auto b = dst->named_parameters();
  for (const auto& item : a) EXPECT_TRUE(torch::equal(item.value(), b[item.key()])) << item.key();
}

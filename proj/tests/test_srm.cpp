#include <gtest/gtest.h>

#include <random>

#include "hrfnet/srm.hpp"
#include "support.hpp"

using namespace hrfnet;
using namespace testing_support;

namespace {

double max_abs_diff(const ResidualImage& out, const Image& img, const FilterBank& bank) {
  const auto oracle = oracle_bank();
  double worst = 0.0;
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    for (int c = 0; c < 3; ++c) {
      const auto ref = direct_convolution(img, c, oracle[k], bank.truncation_threshold);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          worst = std::max(worst, std::abs(out.at(y, x, static_cast<int>(k) * 3 + c) - ref[y * img.width() + x]));
    }
  }
  return worst;
}

}  // namespace

TEST(SrmBank, ThreeZeroSumKernels) {
  const auto bank = srm_kernels();
  ASSERT_EQ(bank.kernels.size(), 3u);
  for (const auto& k : bank.kernels) {
    double sum = 0.0;
    for (double c : k.coefficients) sum += c;
    EXPECT_EQ(sum, 0.0) << k.name;
    EXPECT_EQ(k.side % 2, 1);
  }
  EXPECT_EQ(bank.truncation_threshold, 2.0);
  EXPECT_NO_THROW(bank.validate());
}

TEST(SrmBank, MatchesLiteratureCoefficients) {
  const auto bank = srm_kernels();
  const auto oracle = oracle_bank();
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    EXPECT_EQ(bank.kernels[k].side, oracle[k].side);
    EXPECT_EQ(bank.kernels[k].coefficients, oracle[k].taps);
    EXPECT_EQ(bank.kernels[k].divisor, oracle[k].divisor);
  }
}

TEST(SrmBank, ValidateRejectsBrokenBanks) {
  auto bank = srm_kernels();
  bank.kernels[1].coefficients[0] += 1;
  EXPECT_THROW(bank.validate(), Error);
  bank = srm_kernels();
  bank.truncation_threshold = 0.0;
  EXPECT_THROW(bank.validate(), Error);
  bank = srm_kernels();
  bank.kernels[0].side = 4;
  EXPECT_THROW(bank.validate(), Error);
  EXPECT_THROW(FilterBank{}.validate(), Error);
}

TEST(SrmBank, JsonRoundTripIsBitExact) {
  const auto bank = srm_kernels();
  const auto back = FilterBank::from_json(bank.to_json());
  ASSERT_EQ(back.kernels.size(), bank.kernels.size());
  EXPECT_EQ(back.truncation_threshold, bank.truncation_threshold);
  for (std::size_t k = 0; k < bank.kernels.size(); ++k) {
    EXPECT_EQ(back.kernels[k].name, bank.kernels[k].name);
    EXPECT_EQ(back.kernels[k].coefficients, bank.kernels[k].coefficients);
    EXPECT_EQ(back.kernels[k].divisor, bank.kernels[k].divisor);
  }
  EXPECT_THROW(FilterBank::from_json("{not json"), Error);
}

TEST(ApplySrm, ConstantImageGivesZeroResidual) {
  for (int v : {0, 128, 255}) {
    const auto out = apply_srm(constant_image(12, 17, static_cast<std::uint8_t>(v)), srm_kernels());
    EXPECT_EQ(out.channels(), 9);
    for (float r : out.values()) EXPECT_EQ(r, 0.0f);
  }
}

TEST(ApplySrm, ImpulseStampsFlippedKernel) {
  Image img(9, 9, 3, 0);
  for (int c = 0; c < 3; ++c) img.at(4, 4, c) = 255;
  const auto bank = srm_kernels();
  const auto out = apply_srm(img, bank);
  for (std::size_t k = 0; k < bank.kernels.size(); ++k) {
    const auto& kern = bank.kernels[k];
    const int r = kern.radius();
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 9; ++x) {
        const int u = y - 4, v = x - 4;  // response at offset (u, v) picks tap (-u, -v)
        double expect = 0.0;
        if (std::abs(u) <= r && std::abs(v) <= r) {
          expect = std::clamp(255.0 * kern.weight(r - u, r - v), -2.0, 2.0);
        }
        EXPECT_FLOAT_EQ(out.at(y, x, static_cast<int>(k) * 3), static_cast<float>(expect)) << k << " " << y << "," << x;
      }
    }
  }
}

TEST(ApplySrm, ImpulseResponseIsFlippedForAsymmetricKernel) {
  // third-order taps along x are [1, -3, 3, -1] at offsets -1..2; the
  // sliding window places tap v at output column (centre - v)
  Image img(9, 9, 3, 0);
  for (int c = 0; c < 3; ++c) img.at(4, 4, c) = 1;
  const auto out = apply_srm(img, srm_kernels());
  EXPECT_FLOAT_EQ(out.at(4, 5, 6), 1.0f / 3.0f);
  EXPECT_FLOAT_EQ(out.at(4, 4, 6), -1.0f);
  EXPECT_FLOAT_EQ(out.at(4, 3, 6), 1.0f);
  EXPECT_FLOAT_EQ(out.at(4, 2, 6), -1.0f / 3.0f);
}

TEST(ApplySrm, MatchesDirectConvolutionOracle16) {
  std::mt19937_64 rng(7);
  const auto img = random_image(16, 16, rng);
  EXPECT_LE(max_abs_diff(apply_srm(img, srm_kernels()), img, srm_kernels()), 1e-6);
}

TEST(ApplySrm, MatchesOracleOnRandomSizes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> side(5, 32);
  const auto bank = srm_kernels();
  for (int i = 0; i < 25; ++i) {
    const auto img = random_image(side(rng), side(rng), rng);
    EXPECT_LE(max_abs_diff(apply_srm(img, bank), img, bank), 1e-6);
  }
}

TEST(ApplySrm, LinearInsideClampBound) {
  std::mt19937_64 rng(3);
  const auto x = random_image(20, 20, rng, 0, 2);
  const auto y = random_image(20, 20, rng, 0, 2);
  Raster<int> combo(20, 20, 3);
  Image sum(20, 20, 3);
  for (std::size_t i = 0; i < sum.size(); ++i) sum.values()[i] = static_cast<std::uint8_t>(2 * x.values()[i] + 3 * y.values()[i]);
  const auto bank = srm_kernels();
  auto big = bank;
  big.truncation_threshold = 1e9;  // keep everything inside the bound
  const auto rx = apply_srm(x, big), ry = apply_srm(y, big), rs = apply_srm(sum, big);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_NEAR(rs.values()[i], 2 * rx.values()[i] + 3 * ry.values()[i], 1e-5);
  }
  // with the real bound, small inputs stay inside it: same identity
  const auto sx = random_image(20, 20, rng, 0, 1);
  const auto r1 = apply_srm(sx, bank), r1_big = apply_srm(sx, big);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    if (std::abs(r1_big.values()[i]) < 2.0f) EXPECT_EQ(r1.values()[i], r1_big.values()[i]);
  }
}

TEST(ApplySrm, ShiftEquivariantAwayFromBorder) {
  std::mt19937_64 rng(5);
  const auto img = random_image(24, 24, rng, 100, 110);
  const int dx = 3, dy = 2;
  Image shifted(24, 24, 3);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) shifted.at(y, x, c) = img.at(reflect_index(y - dy, 24), reflect_index(x - dx, 24), c);
  const auto a = apply_srm(img, srm_kernels());
  const auto b = apply_srm(shifted, srm_kernels());
  const int margin = 2;
  for (int y = margin + dy; y < 24 - margin; ++y)
    for (int x = margin + dx; x < 24 - margin; ++x)
      for (int c = 0; c < 9; ++c) EXPECT_EQ(b.at(y, x, c), a.at(y - dy, x - dx, c));
}

TEST(ApplySrm, StepEdgeSaturatesAtThreshold) {
  Image img(16, 16, 3, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 255;
  const auto out = apply_srm(img, srm_kernels());
  float peak = 0.0f;
  for (float v : out.values()) peak = std::max(peak, std::abs(v));
  EXPECT_EQ(peak, 2.0f);
}

TEST(ApplySrm, RejectsBadInputs) {
  EXPECT_THROW(apply_srm(Image(4, 9, 3), srm_kernels()), Error);
  try {
    apply_srm(Image(9, 9, 1), srm_kernels());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Channels);
  }
}

TEST(ApplySrm, LuminanceModeHasOneChannelPerKernel) {
  std::mt19937_64 rng(1);
  const auto out = apply_srm(random_image(10, 10, rng), srm_kernels(), {.per_channel = false});
  EXPECT_EQ(out.channels(), 3);
  EXPECT_EQ(srm_output_channels(srm_kernels(), {.per_channel = false}), 3);
  EXPECT_EQ(srm_output_channels(srm_kernels()), 9);
}

TEST(Downsample, ConstantStaysConstant) {
  const auto out = downsample(constant_image(1000, 1000, 77), {224, 224});
  EXPECT_EQ(out.height(), 224);
  EXPECT_EQ(out.width(), 224);
  for (float v : out.values()) EXPECT_EQ(v, 77.0f);
}

TEST(Downsample, SameSizeIsIdentity) {
  std::mt19937_64 rng(2);
  const auto img = random_image(13, 9, rng);
  const auto out = downsample(img, {13, 9});
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out.values()[i], static_cast<float>(img.values()[i]));
}

TEST(Downsample, CheckerboardAveragesWithoutCornerAlignment) {
  Image board(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) board.at(y, x, c) = ((x + y) % 2) ? 255 : 0;
  const auto out = downsample(board, {2, 2});
  for (float v : out.values()) EXPECT_FLOAT_EQ(v, 127.5f);
}

TEST(Downsample, NoOvershootAndWorksOnResiduals) {
  std::mt19937_64 rng(9);
  const auto res = apply_srm(random_image(40, 40, rng), srm_kernels());
  const auto out = downsample(res, {17, 23});
  EXPECT_EQ(out.channels(), 9);
  const auto [lo, hi] = std::minmax_element(res.values().begin(), res.values().end());
  for (float v : out.values()) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(Downsample, RejectsUpsampling) {
  EXPECT_THROW(downsample(Image(8, 8, 3), {9, 8}), Error);
  EXPECT_THROW(downsample(Image(8, 8, 3), {0, 4}), Error);
}

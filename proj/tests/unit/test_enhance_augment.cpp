#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hedseg/augment.hpp"
#include "hedseg/enhance.hpp"
#include "hedseg/error.hpp"
#include "hedseg/rng.hpp"
#include "oracles.hpp"

using namespace hedseg;

namespace {

Image noise_image(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Image img(rows, cols);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform());
  return img;
}

Slice ct_slice(const Image& img) { return Slice{"P", 0, Modality::CT, img, std::nullopt}; }

}  // namespace

TEST(Clahe, SingleTileWithoutClippingIsHistogramEqualization) {
  // Values sit in the middle of distinct 1/256 bins; output = fraction of pixels at or below the bin.
  Rng rng(3);
  Image img(16, 16);
  std::vector<int> bins(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    bins[i] = static_cast<int>(rng.below(40)) * 5;
    img[i] = static_cast<float>((bins[i] + 0.5) / 256.0);
  }
  const Image out = clahe(img, 1000.0, {1, 1});
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto le = std::count_if(bins.begin(), bins.end(), [&](int b) { return b <= bins[i]; });
    EXPECT_NEAR(out[i], le / 256.0, 1e-6);
  }
}

TEST(Clahe, ClippingRedistributesExcess) {
  // Half the pixels in one bin, half in another, clip limit 2 * 64/256 -> floor 1.
  Image img(8, 8);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = i < 32 ? 10.5f / 256 : 200.5f / 256;
  const Image out = clahe(img, 2.0, {1, 1});
  // Each bin keeps 1 count, the other 62 spread evenly over 256 bins.
  const double share = 62.0 / 256.0;
  const double low = (11 * share + 1) / 64.0;
  const double high = (201 * share + 2) / 64.0;
  EXPECT_NEAR(out[0], low, 1e-6);
  EXPECT_NEAR(out[63], high, 1e-6);
}

TEST(Clahe, ConstantImageIsIdentity) {
  for (float v : {0.0f, 0.3f, 1.0f}) EXPECT_EQ(clahe(Image(32, 24, v), 3.0, {4, 3}), Image(32, 24, v));
}

TEST(Clahe, RejectsBadArguments) {
  EXPECT_THROW(clahe(Image(8, 8, 0.5f), 0.0, {2, 2}), Error);
  EXPECT_THROW(clahe(Image(8, 8, 0.5f), 2.0, {9, 2}), Error);
}

TEST(Clahe, PreservesOrderWithinATile) {
  const Image img = noise_image(20, 20, 8);
  const Image out = clahe(img, 2.0, {1, 1});
  for (std::size_t i = 1; i < img.size(); ++i) {
    if (img[i] > img[0]) EXPECT_GE(out[i], out[0]);
  }
}

TEST(Gaussian, KernelNormalizedAndSymmetric) {
  const auto k = gaussian_kernel(1.5);
  EXPECT_EQ(k.size(), 13u);
  EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
  for (std::size_t i = 0; i < k.size(); ++i) EXPECT_DOUBLE_EQ(k[i], k[k.size() - 1 - i]);
}

TEST(Gaussian, BlurKeepsConstant) {
  const Image out = gaussian_blur(Image(9, 11, 0.4f), 2.0);
  for (float v : out.values()) EXPECT_NEAR(v, 0.4f, 1e-6);
}

TEST(EnhanceCt, MeanPreservedAndRangeKept) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Slice in = ct_slice(noise_image(64, 64, s));
    const Slice out = enhance_ct(in, {});
    EXPECT_NEAR(mean(out.pixels), mean(in.pixels), 1e-4);
    for (float v : out.pixels.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(EnhanceCt, RejectsMr) {
  Slice s = ct_slice(Image(8, 8, 0.5f));
  s.modality = Modality::MrT2;
  EXPECT_THROW(enhance_ct(s, {}), Error);
}

TEST(EnhanceMr, ZeroAmountIsBitIdentical) {
  Slice s{"P", 0, Modality::MrT1In, noise_image(20, 30, 4), std::nullopt};
  MrEnhanceConfig cfg;
  cfg.amount = 0.0;
  EXPECT_EQ(enhance_mr(s, cfg).pixels, s.pixels);
}

TEST(EnhanceMr, SharpensAStep) {
  Image img(10, 20, 0.2f);
  for (int r = 0; r < 10; ++r)
    for (int c = 10; c < 20; ++c) img(r, c) = 0.8f;
  Slice s{"P", 0, Modality::MrT2, img, std::nullopt};
  const Slice out = enhance_mr(s, {});
  EXPECT_LT(out.pixels(5, 9), 0.2f);  // undershoot on the dark side
  EXPECT_GT(out.pixels(5, 10), 0.8f);
}

TEST(Augment, HflipMirrorsPixelsAndMask) {
  Mask m(3, 4, 0);
  m(1, 0) = 1;
  Image img(3, 4, 0.0f);
  img(2, 1) = 0.7f;
  const Slice f = hflip(Slice{"P", 0, Modality::CT, img, m});
  EXPECT_EQ((*f.mask)(1, 3), 1);
  EXPECT_FLOAT_EQ(f.pixels(2, 2), 0.7f);
}

TEST(Augment, ReflectCoordinate) {
  EXPECT_DOUBLE_EQ(reflect_coordinate(-1.0, 5), 1.0);
  EXPECT_DOUBLE_EQ(reflect_coordinate(5.0, 5), 3.0);
  EXPECT_DOUBLE_EQ(reflect_coordinate(2.5, 5), 2.5);
  EXPECT_DOUBLE_EQ(reflect_coordinate(9.0, 5), 1.0);
}

TEST(Augment, ElasticIsSeededAndKeepsMaskBinary) {
  Rng rng(12);
  const Slice s{"P", 0, Modality::CT, noise_image(24, 24, 1), oracle::random_mask(24, 24, 0.5, rng)};
  const Slice a = elastic_deform(s, {3.0, 0.4, 77});
  const Slice b = elastic_deform(s, {3.0, 0.4, 77});
  const Slice c = elastic_deform(s, {3.0, 0.4, 78});
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_FALSE(a.pixels == c.pixels);
  for (auto v : a.mask->values()) EXPECT_LE(v, 1);
}

TEST(Augment, ElasticZeroAlphaIsIdentity) {
  Rng rng(13);
  const Slice s{"P", 0, Modality::CT, noise_image(17, 23, 2), oracle::random_mask(17, 23, 0.5, rng)};
  const Slice e = elastic_deform(s, {0.0, 0.4, 5});
  EXPECT_EQ(e.pixels, s.pixels);
  EXPECT_EQ(*e.mask, *s.mask);
}

TEST(Augment, DisplacementBoundedByAlpha) {
  const Displacement d = elastic_displacement(30, 30, {2.0, 4.0, 9});
  for (std::size_t i = 0; i < d.dx.size(); ++i) {
    EXPECT_LE(std::abs(d.dx[i]), 2.0 + 1e-6);
    EXPECT_LE(std::abs(d.dy[i]), 2.0 + 1e-6);
  }
}

TEST(Augment, PolicyProducesOriginalPlusEnabledVariants) {
  const Slice s{"P", 0, Modality::CT, noise_image(16, 16, 3), Mask(16, 16, 0)};
  AugmentPolicy p;
  p.global_seed = 4;
  auto all = apply_policy(s, p, "P/0");
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].pixels, s.pixels);
  EXPECT_EQ(all[1].pixels, hflip(s).pixels);
  EXPECT_EQ(apply_policy(s, p, "P/0")[3].pixels, all[3].pixels);
  EXPECT_FALSE(apply_policy(s, p, "P/1")[3].pixels == all[3].pixels);
  p.enable_sharpen = false;
  p.enable_elastic = false;
  EXPECT_EQ(apply_policy(s, p, "P/0").size(), 2u);
}

TEST(Augment, InvalidPolicyThrows) {
  AugmentPolicy p;
  p.elastic_alpha = {4.0, 12.0};
  EXPECT_THROW(p.validate(), Error);
  EXPECT_THROW(elastic_deform(Slice{"P", 0, Modality::CT, Image(4, 4), std::nullopt}, {-1.0, 0.4, 1}), Error);
}

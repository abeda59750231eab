// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "jqg/augment.hpp"
#include "jqg/errors.hpp"

using namespace jqg;
using namespace jqg::augment;

namespace {

PlanarImage random_planar(std::size_t h, std::size_t w, std::uint64_t seed) {
  Philox rng(seed, 0);
  PlanarImage img(h, w);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

Image blob(std::size_t n) {
  Image img(n, n);
  const double c = (static_cast<double>(n) - 1) / 2, s = static_cast<double>(n) / 8;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double r2 = (y - c) * (y - c) + (x - c) * (x - c);
      for (std::size_t ch = 0; ch < 3; ++ch)
        img.at(y, x, ch) = static_cast<float>(200.0 * std::exp(-r2 / (2 * s * s)) * (1.0 - 0.2 * ch));
    }
  return img;
}

// Half-pixel-centre bilinear with edge clamping, written directly.
double bilinear_ref(const PlanarImage& img, std::size_t c, std::size_t oy, std::size_t ox, std::size_t oh,
                    std::size_t ow) {
  const auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    double s = (o + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  const double sy = src(oy, img.height, oh), sx = src(ox, img.width, ow);
  const auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
         fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

}  // namespace

TEST(Quantize, Rounding) {
  PlanarImage img(1, 3);
  img.data = {0.0f, 1.0f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f};
  const auto u = to_uint8(img);
  EXPECT_EQ(u.at(0, 0, 0), 0);
  EXPECT_EQ(u.at(0, 1, 0), 255);
  EXPECT_EQ(u.at(0, 2, 0), 128);  // 127.5 -> even
}

TEST(Quantize, RoundTripBound) {
  const auto img = random_planar(9, 7, 1);
  const auto back = to_float(to_uint8(img));
  for (std::size_t i = 0; i < img.data.size(); ++i) ASSERT_LE(std::abs(back.data[i] - img.data[i]), 1.0 / 510 + 1e-7);
}

TEST(Layout, AsymmetricTranspose) {
  PlanarImage img(2, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i) / 255.0f;
  const auto u = to_uint8(img);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(u.at(y, x, c), (c * 2 + y) * 3 + x);
  const auto f = to_float(u);
  EXPECT_EQ(f.at(2, 1, 2), 17.0f / 255.0f);
  Uint8Image e{1, 1, {255, 0, 0}};
  EXPECT_EQ(to_float(e).at(0, 0, 0), 1.0f);
  EXPECT_EQ(to_float(e).at(1, 0, 0), 0.0f);
}

TEST(Resize, MatchesReference) {
  const auto img = random_planar(9, 6, 2);
  const auto out = resize_bilinear(img, 13, 4);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 13; ++y)
      for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(out.at(c, y, x), bilinear_ref(img, c, y, x, 13, 4), 1e-6);
  const auto same = resize_bilinear(img, 9, 6);
  EXPECT_EQ(same.data, img.data);
}

TEST(Crop, DegenerateIsFullResize) {
  AugmentConfig c;
  c.crop_scale_lo = c.crop_scale_hi = 1.0;
  c.crop_ratio_lo = c.crop_ratio_hi = 1.0;
  c.out_size = 8;
  Philox rng(3, 0);
  const auto r = sample_crop(20, 20, c, rng);
  EXPECT_EQ(r.top, 0u);
  EXPECT_EQ(r.left, 0u);
  EXPECT_EQ(r.height, 20u);
  EXPECT_EQ(r.width, 20u);
  const Image img = blob(20);
  Philox rng2(3, 0);
  EXPECT_EQ(random_resized_crop(img, c, rng2).data, resize_bilinear(img, 8, 8).data);
}

TEST(Crop, SeededAndInBounds) {
  const AugmentConfig c;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Philox a(s, 1), b(s, 1);
    const auto r1 = sample_crop(125, 125, c, a), r2 = sample_crop(125, 125, c, b);
    EXPECT_EQ(r1.top, r2.top);
    EXPECT_EQ(r1.width, r2.width);
    EXPECT_LE(r1.top + r1.height, 125u);
    EXPECT_LE(r1.left + r1.width, 125u);
  }
}

TEST(Flip, Cases) {
  Image img(2, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
  Philox rng(1, 1);
  EXPECT_EQ(random_hflip(img, 0.0, rng).data, img.data);
  EXPECT_EQ(random_hflip(random_hflip(img, 1.0, rng), 1.0, rng).data, img.data);
  const auto f = hflip(img);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(f.at(y, x, c), img.at(y, 2 - x, c));
}

TEST(Rotate, IdentityAndRoundTrip) {
  const Image img = blob(48);
  EXPECT_EQ(rotate(img, 0.0).data, img.data);
  const auto back = rotate(rotate(img, 20.0), -20.0);
  double diff = 0;
  for (std::size_t i = 0; i < img.data.size(); ++i) diff += std::abs(back.data[i] - img.data[i]) / 255.0;
  diff /= static_cast<double>(img.data.size());
  EXPECT_GT(diff, 0.0);
  EXPECT_LT(diff, 0.02);
}

TEST(Rotate, QuarterTurnIsCounterClockwise) {
  Image img(5, 5);
  img.at(2, 4, 0) = 100;  // right of centre
  const auto r = rotate(img, 90.0);
  EXPECT_NEAR(r.at(0, 2, 0), 100.0f, 1e-3);  // moves to the top
}

TEST(Rotate, SmoothMassNotIncreased) {
  const Image img = blob(48);
  const auto r = rotate(img, 17.0);
  double a = 0, b = 0;
  for (float v : img.data) a += v;
  for (float v : r.data) b += v;
  EXPECT_LE(b, a * (1 + 1e-6));
}

TEST(Jitter, IdentityAndBrightness) {
  const Image img = blob(10);
  const auto same = apply_jitter(img, JitterParams{});
  for (std::size_t i = 0; i < img.data.size(); ++i) ASSERT_LE(std::abs(same.data[i] - img.data[i]), 1.0f);
  Image gray(1, 1);
  gray.data = {100, 100, 100};
  JitterParams p;
  p.brightness = 1.2;
  EXPECT_NEAR(apply_jitter(gray, p).at(0, 0, 0), 120.0f, 1e-4);
  p.brightness = 3.0;
  EXPECT_EQ(apply_jitter(gray, p).at(0, 0, 1), 255.0f);
}

TEST(Imagenet, Constants) {
  PlanarImage img(1, 1);
  img.data = {0.485f, 0.5f, 0.406f + 0.225f};
  const auto n = imagenet_normalize(img);
  EXPECT_NEAR(n.data[0], 0.0f, 1e-6);
  EXPECT_NEAR(n.data[2], 1.0f, 1e-6);
  const auto back = imagenet_denormalize(n);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-6);
}

TEST(Mixup, ForcedLambdas) {
  Batch a{2, 2, 2, {1, 2, 3, 4}, {1, 0, 0, 1}}, b{2, 2, 2, {5, 6, 7, 8}, {0, 1, 1, 0}};
  const auto one = mixup(a, b, 1.0);
  EXPECT_EQ(one.images, a.images);
  EXPECT_EQ(one.labels, a.labels);
  const auto half = mixup(a, b, 0.5);
  EXPECT_EQ(half.images, (std::vector<float>{3, 4, 5, 6}));
  EXPECT_EQ(half.labels, (std::vector<double>{0.5, 0.5, 0.5, 0.5}));
  EXPECT_THROW(mixup(a, b, 1.5), DomainError);
  Philox rng(1, 0);
  for (int i = 0; i < 100; ++i) {
    const double l = sample_mixup_lambda(0.2, rng);
    ASSERT_GE(l, 0.0);
    ASSERT_LE(l, 1.0);
  }
}

TEST(Pipelines, ValidationDeterministicAndConstant) {
  AugmentConfig c;
  c.out_size = 32;
  c.imagenet_normalize = true;
  PlanarImage zero(125, 125);
  const auto v = validation_transform(zero, c);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < 32 * 32; ++i)
      ASSERT_EQ(v.data[ch * 32 * 32 + i], v.data[ch * 32 * 32]);
  const auto img = random_planar(125, 125, 4);
  EXPECT_EQ(validation_transform(img, c).data, validation_transform(img, c).data);
}

TEST(Pipelines, IdentityTrainMatchesValidation) {
  AugmentConfig c;
  c.out_size = 40;
  const auto img = random_planar(125, 125, 5);
  TrainParams p;
  p.crop = {0, 0, 125, 125};
  p.jitter_enabled = false;
  const auto t = apply_train_transform(img, p, c);
  const auto v = validation_transform(img, c);
  for (std::size_t i = 0; i < t.data.size(); ++i) ASSERT_LE(std::abs(t.data[i] - v.data[i]), 1.0 / 510 + 1e-6);
}

TEST(Pipelines, TrainSeeded) {
  AugmentConfig c;
  c.out_size = 24;
  const auto img = random_planar(40, 40, 6);
  Philox a(7, 7), b(7, 7);
  EXPECT_EQ(train_transform(img, c, a).data, train_transform(img, c, b).data);
  c.crop_scale_lo = 0;
  EXPECT_THROW(c.validate(), DomainError);
}

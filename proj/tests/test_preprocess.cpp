// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "jqg/errors.hpp"
#include "jqg/kernels.hpp"
#include "jqg/preprocess.hpp"
#include "test_util.hpp"

using namespace jqg;
using namespace jqg::preprocess;
using detector::JetWindow;

namespace {

JetWindow random_window(Philox& rng, double density = 0.05) {
  JetWindow w;
  for (float& v : w.data)
    if (rng.uniform() < density) v = static_cast<float>(-2.0 * std::log1p(-rng.uniform()));
  return w;
}

ChannelStats make_stats(std::array<double, 3> mu, std::array<double, 3> sigma) {
  ChannelStats s;
  s.mu = mu;
  s.sigma = sigma;
  return s;
}

}  // namespace

TEST(Stats, HandComputation) {
  StatsAccumulator acc;
  const std::vector<float> img{0, 0, 4, 4, 0, 0, 4, 4, 0, 0, 4, 4};
  acc.add(img, 1e-3);
  const auto s = acc.finish();
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(s.mu[k], 2.0);
    EXPECT_EQ(s.sigma[k], 2.0);
  }
}

TEST(Stats, ConstantChannelIsDegenerate) {
  Philox rng(1, 0);
  JetWindow w = random_window(rng);
  std::fill(w.data.begin(), w.data.begin() + 125 * 125, 2.0f);
  std::vector<JetWindow> v{w};
  EXPECT_THROW(compute_channel_stats(v), DegenerateChannel);
  EXPECT_THROW(StatsAccumulator{}.finish(), DegenerateChannel);
  EXPECT_THROW(compute_channel_stats(std::vector<JetWindow>{}), DomainError);
}

TEST(Stats, MatchesTwoPassOracle) {
  Philox rng(2, 0);
  std::vector<JetWindow> ws;
  for (int i = 0; i < 1000; ++i) ws.push_back(random_window(rng, 0.01));
  ws[3].data[7] = 5e-4f;  // below threshold, counts as zero
  const auto s = compute_channel_stats(ws);
  const std::size_t n = 125 * 125;
  for (std::size_t k = 0; k < 3; ++k) {
    long double sum = 0;
    for (const auto& w : ws)
      for (std::size_t i = 0; i < n; ++i) {
        const float v = w.data[k * n + i];
        sum += v < 1e-3f ? 0.0L : static_cast<long double>(v);
      }
    const long double mean = sum / (ws.size() * n);
    long double m2 = 0;
    for (const auto& w : ws)
      for (std::size_t i = 0; i < n; ++i) {
        const float v = w.data[k * n + i];
        const long double x = v < 1e-3f ? 0.0L : static_cast<long double>(v);
        m2 += (x - mean) * (x - mean);
      }
    const double sigma = static_cast<double>(std::sqrt(m2 / (ws.size() * n)));
    EXPECT_NEAR(s.mu[k], static_cast<double>(mean), 1e-10 * static_cast<double>(mean));
    EXPECT_NEAR(s.sigma[k], sigma, 1e-10 * sigma);
  }
  EXPECT_EQ(s.n_pixels, ws.size() * n);
}

TEST(Stages, ZeroSuppress) {
  const std::vector<double> x{9.99e-4, 1e-3, 0.5, -1.0};
  const auto y = zero_suppress(x, 1e-3);
  EXPECT_EQ(y, (std::vector<double>{0.0, 1e-3, 0.5, 0.0}));
}

TEST(Stages, ZScore) {
  const auto s = make_stats({5, 5, 0}, {2, 2, 1});
  const auto y = zscore_normalize(std::vector<double>{5.0, 9.0, 5.0, 9.0, 1.5, -2.25}, s);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 2.0);
  EXPECT_EQ(y[4], 1.5);
  EXPECT_EQ(y[5], -2.25);
  EXPECT_THROW(zscore_normalize(std::vector<double>{1, 2}, s), ShapeError);
}

TEST(Stages, Clip) {
  const auto s = make_stats({0, 0, 0}, {2, 1, 1});
  const auto y = clip_outliers(std::vector<double>{1200, -50, 400, 600, 3, 499}, s, 500);
  EXPECT_EQ(y, (std::vector<double>{1000, -50, 400, 500, 3, 499}));
}

TEST(Stages, MinMax) {
  for (double v : minmax_scale(std::vector<double>(6, 3.5), 1e-5)) EXPECT_EQ(v, 0.0);
  const auto y = minmax_scale(std::vector<double>{-1, 3, 1}, 1e-5);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[2], 0.49999875000312499, 1e-16);
  EXPECT_LT(y[1], 1.0);
}

TEST(Preprocess, AllZeroWindow) {
  const JetWindow w;
  const auto y = preprocess_window(w, make_stats({0, 0, 0}, {1, 2, 3}));
  for (float v : y) ASSERT_EQ(v, 0.0f);
}

TEST(Preprocess, GoldenFixtureBitExact) {
  const auto in = jqg::testing::read_golden("preprocess_golden_input.bin");
  const auto out = jqg::testing::read_golden("preprocess_golden_output.bin");
  const auto stats = jqg::testing::golden_stats();
  ASSERT_EQ(in.size(), 3u);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto y = preprocess_image(in[i], stats);
    ASSERT_EQ(y.size(), out[i].size());
    EXPECT_EQ(0, std::memcmp(y.data(), out[i].data(), y.size() * sizeof(float))) << "window " << i;
  }
}

TEST(Preprocess, RangeAndDeterminism) {
  Philox rng(3, 0);
  std::vector<JetWindow> ws;
  for (int i = 0; i < 50; ++i) ws.push_back(random_window(rng));
  ws[0].data[100] = 1e6f;
  const auto stats = compute_channel_stats(ws);
  const bool before = kernels::deterministic();
  kernels::set_deterministic(false);
  const auto a = preprocess_all(ws, stats);
  kernels::set_deterministic(true);
  const auto b = preprocess_all(ws, stats);
  kernels::set_deterministic(before);
  EXPECT_EQ(a, b);
  for (const auto& y : a)
    for (float v : y) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0f);
      ASSERT_LT(v, 1.0f);
    }
}

TEST(Preprocess, ChannelArgmaxPreserved) {
  Philox rng(4, 0);
  const auto stats = make_stats({0.1, 0.2, 0.3}, {1.0, 1.5, 2.0});
  for (int t = 0; t < 20; ++t) {
    JetWindow w = random_window(rng);
    const auto y = preprocess_window(w, stats);
    const std::size_t n = 125 * 125;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto in_max = std::max_element(w.data.begin() + k * n, w.data.begin() + (k + 1) * n) - w.data.begin();
      const auto out_max = std::max_element(y.begin() + k * n, y.begin() + (k + 1) * n) - y.begin();
      EXPECT_EQ(in_max, out_max);
    }
  }
}

TEST(Preprocess, ConfigValidation) {
  PreprocConfig c;
  c.clip_factor = 0;
  EXPECT_THROW(c.validate(), DomainError);
}

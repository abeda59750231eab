// SPDX-License-Identifier: Apache-2.0
#include "jqg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jqg/errors.hpp"
#include "jqg/kernels.hpp"

namespace jqg::preprocess {

void PreprocConfig::validate() const {
  if (!(zero_threshold > 0 && clip_factor > 0 && eps > 0))
    throw DomainError("preprocessing constants must be strictly positive");
}

void StatsAccumulator::add(std::span<const float> image, double zero_threshold) {
  if (image.size() % kChannels != 0) throw ShapeError("image is not 3-channel planar");
  const std::size_t n = image.size() / kChannels;
  if (n == 0) return;
  StatsAccumulator local;
  local.count_ = n;
  for (std::size_t k = 0; k < kChannels; ++k) {
    const float* p = image.data() + k * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = p[i];
      sum += v < zero_threshold ? 0.0 : v;
    }
    const double mean = sum / static_cast<double>(n);
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = p[i] < zero_threshold ? 0.0 : static_cast<double>(p[i]);
      m2 += (v - mean) * (v - mean);
    }
    local.mean_[k] = mean;
    local.m2_[k] = m2;
  }
  merge(local);
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t k = 0; k < kChannels; ++k) {
    const double delta = other.mean_[k] - mean_[k];
    mean_[k] += delta * nb / n;
    m2_[k] += other.m2_[k] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

ChannelStats StatsAccumulator::finish() const {
  if (count_ == 0) throw DegenerateChannel("no pixels accumulated");
  ChannelStats s;
  s.n_pixels = count_;
  for (std::size_t k = 0; k < kChannels; ++k) {
    s.mu[k] = mean_[k];
    s.sigma[k] = std::sqrt(m2_[k] / static_cast<double>(count_));
    if (!(s.sigma[k] > 0.0))
      throw DegenerateChannel("channel " + std::to_string(k) + " has zero standard deviation");
  }
  return s;
}

ChannelStats compute_channel_stats(std::span<const detector::JetWindow> windows,
                                   const PreprocConfig& config) {
  config.validate();
  if (windows.empty()) throw DomainError("statistics need at least one training window");
  std::vector<StatsAccumulator> partial(windows.size());
  const auto n = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(static) if (!kernels::deterministic())
  for (std::ptrdiff_t i = 0; i < n; ++i)
    partial[static_cast<std::size_t>(i)].add(windows[static_cast<std::size_t>(i)].data,
                                             config.zero_threshold);
  StatsAccumulator total;
  for (const auto& p : partial) total.merge(p);
  return total.finish();
}

std::vector<double> zero_suppress(std::span<const double> image, double threshold) {
  std::vector<double> out(image.begin(), image.end());
  for (double& v : out)
    if (v < threshold) v = 0.0;
  return out;
}

std::vector<double> zscore_normalize(std::span<const double> image, const ChannelStats& stats) {
  if (image.size() % kChannels != 0) throw ShapeError("image is not 3-channel planar");
  const std::size_t n = image.size() / kChannels;
  std::vector<double> out(image.size());
  for (std::size_t k = 0; k < kChannels; ++k)
    for (std::size_t i = 0; i < n; ++i)
      out[k * n + i] = (image[k * n + i] - stats.mu[k]) / stats.sigma[k];
  return out;
}

std::vector<double> clip_outliers(std::span<const double> image, const ChannelStats& stats,
                                  double clip_factor) {
  if (image.size() % kChannels != 0) throw ShapeError("image is not 3-channel planar");
  const std::size_t n = image.size() / kChannels;
  std::vector<double> out(image.size());
  for (std::size_t k = 0; k < kChannels; ++k) {
    const double cap = clip_factor * stats.sigma[k];
    for (std::size_t i = 0; i < n; ++i) out[k * n + i] = std::min(image[k * n + i], cap);
  }
  return out;
}

std::vector<double> minmax_scale(std::span<const double> image, double eps) {
  std::vector<double> out(image.size(), 0.0);
  if (image.empty()) return out;
  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  const double mn = *lo;
  const double denom = (*hi - mn) + eps;
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = (image[i] - mn) / denom;
  return out;
}

std::vector<float> preprocess_image(std::span<const float> image, const ChannelStats& stats,
                                    const PreprocConfig& config) {
  std::vector<double> x(image.begin(), image.end());
  x = zero_suppress(x, config.zero_threshold);
  x = zscore_normalize(x, stats);
  x = clip_outliers(x, stats, config.clip_factor);
  x = minmax_scale(x, config.eps);
  // The real-valued result is < 1, but float rounding can land on 1.0f.
  constexpr float kBelowOne = 1.0f - std::numeric_limits<float>::epsilon() / 2;
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(static_cast<float>(x[i]), kBelowOne);
  return out;
}

std::vector<float> preprocess_window(const detector::JetWindow& window, const ChannelStats& stats,
                                     const PreprocConfig& config) {
  return preprocess_image(window.data, stats, config);
}

std::vector<std::vector<float>> preprocess_all(std::span<const detector::JetWindow> windows,
                                               const ChannelStats& stats,
                                               const PreprocConfig& config) {
  std::vector<std::vector<float>> out(windows.size());
  const auto n = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(static) if (!kernels::deterministic())
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        preprocess_window(windows[static_cast<std::size_t>(i)], stats, config);
  return out;
}

}  // namespace jqg::preprocess

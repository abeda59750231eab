// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic per-window preprocessing:
//   zero suppression -> global z-score -> outlier clip -> joint min-max.
// Images are planar [3][H][W]; intermediate stages run in double.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "jqg/detector_image.hpp"

namespace jqg::preprocess {

inline constexpr std::size_t kChannels = 3;

struct ChannelStats {
  std::array<double, kChannels> mu{};
  std::array<double, kChannels> sigma{};
  std::size_t n_pixels = 0;  // per channel
};

struct PreprocConfig {
  double zero_threshold = 1e-3;
  double clip_factor = 500.0;
  double eps = 1e-5;
  void validate() const;
};

// Streaming per-channel mean / population variance (Welford, Chan merge).
class StatsAccumulator {
 public:
  // `image` is planar [3][n]; values below `zero_threshold` count as 0.
  void add(std::span<const float> image, double zero_threshold);
  void merge(const StatsAccumulator& other);
  // Throws DegenerateChannel when a channel has zero spread or no pixels.
  ChannelStats finish() const;

 private:
  std::array<double, kChannels> mean_{};
  std::array<double, kChannels> m2_{};
  std::size_t count_ = 0;
};

// Statistics of the zero-suppressed training windows. Partial sums are formed
// per window in parallel and merged in input order.
ChannelStats compute_channel_stats(std::span<const detector::JetWindow> windows,
                                   const PreprocConfig& config = {});

std::vector<double> zero_suppress(std::span<const double> image, double threshold);
std::vector<double> zscore_normalize(std::span<const double> image, const ChannelStats& stats);
// min(z, clip_factor * sigma_k), upper bound only.
std::vector<double> clip_outliers(std::span<const double> image, const ChannelStats& stats,
                                  double clip_factor);
// (x - min) / (max - min + eps) with min/max over all channels of the sample.
std::vector<double> minmax_scale(std::span<const double> image, double eps);

// Full chain on a raw window; output is float32 in [0, 1).
std::vector<float> preprocess_window(const detector::JetWindow& window, const ChannelStats& stats,
                                     const PreprocConfig& config = {});
std::vector<float> preprocess_image(std::span<const float> image, const ChannelStats& stats,
                                    const PreprocConfig& config = {});

// Batch form, parallel over windows.
std::vector<std::vector<float>> preprocess_all(std::span<const detector::JetWindow> windows,
                                               const ChannelStats& stats,
                                               const PreprocConfig& config = {});

}  // namespace jqg::preprocess

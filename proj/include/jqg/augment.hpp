// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training-time augmentation chain and the deterministic validation path.
//
// Train:  [0,1) planar -> uint8 -> random resized crop -> h-flip -> rotate
//         -> color jitter -> float [0,1] CHW -> (ImageNet normalize)
// Valid:  [0,1) planar -> bilinear resize -> (ImageNet normalize)
//
// After the single uint8 quantization the geometric and photometric stages
// run on float pixels in the 8-bit range, so the train path with identity
// parameters matches the validation path to within half a quantization step.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jqg/detector_image.hpp"
#include "jqg/preprocess.hpp"
#include "jqg/rng.hpp"

namespace jqg::augment {

inline constexpr std::size_t kChannels = 3;

struct AugmentConfig {
  double crop_scale_lo = 0.8, crop_scale_hi = 1.0;
  double crop_ratio_lo = 0.75, crop_ratio_hi = 1.33;
  std::size_t out_size = 224;
  double flip_prob = 0.5;
  double max_rotation_deg = 20.0;
  double jitter_bcs = 0.2;  // brightness / contrast / saturation
  double jitter_hue = 0.1;
  bool color_jitter = true;
  double mixup_alpha = 0.2;
  bool imagenet_normalize = false;  // true on the conv-backbone path
  void validate() const;
};

// Channel-first float image [3][height][width].
struct PlanarImage {
  std::size_t height = 0, width = 0;
  std::vector<float> data;
  PlanarImage() = default;
  PlanarImage(std::size_t h, std::size_t w) : height(h), width(w), data(kChannels * h * w, 0.0f) {}
  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
};

// Interleaved 8-bit image [height][width][3].
struct Uint8Image {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> data;
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * kChannels + c];
  }
};

// Interleaved float image [height][width][3] holding 8-bit-range intensities.
struct Image {
  std::size_t height = 0, width = 0;
  std::vector<float> data;
  Image() = default;
  Image(std::size_t h, std::size_t w) : height(h), width(w), data(h * w * kChannels, 0.0f) {}
  float& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * kChannels + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * kChannels + c];
  }
};

PlanarImage make_planar(std::span<const float> chw, std::size_t height, std::size_t width);

// round(x * 255) with ties to even, clamped to [0, 255]; CHW -> HWC.
Uint8Image to_uint8(const PlanarImage& image);
Image to_image(const Uint8Image& image);

// x / 255 and HWC -> CHW.
PlanarImage to_float(const Image& image);
PlanarImage to_float(const Uint8Image& image);

inline constexpr std::array<double, 3> kImagenetMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImagenetStd{0.229, 0.224, 0.225};
PlanarImage imagenet_normalize(const PlanarImage& image);
PlanarImage imagenet_denormalize(const PlanarImage& image);

// Half-pixel-centre bilinear resampling with edge clamping.
PlanarImage resize_bilinear(const PlanarImage& image, std::size_t out_h, std::size_t out_w);
Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w);

struct CropRect {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

// Up to 10 draws of (area fraction, log-uniform aspect); centre crop with the
// aspect clamped into range if none fits.
CropRect sample_crop(std::size_t height, std::size_t width, const AugmentConfig& config, Philox& rng);
Image resized_crop(const Image& image, const CropRect& rect, std::size_t out_size);
Image random_resized_crop(const Image& image, const AugmentConfig& config, Philox& rng);

Image hflip(const Image& image);
Image random_hflip(const Image& image, double p, Philox& rng);

// Counter-clockwise rotation about the image centre, bilinear, zero fill.
Image rotate(const Image& image, double degrees);
Image random_rotate(const Image& image, double max_deg, Philox& rng);

struct JitterParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;                        // turns
  std::array<int, 4> order{0, 1, 2, 3};    // 0 b, 1 c, 2 s, 3 h
};

JitterParams sample_jitter(const AugmentConfig& config, Philox& rng);
Image apply_jitter(const Image& image, const JitterParams& params);
Image color_jitter(const Image& image, const AugmentConfig& config, Philox& rng);

// All random choices of one train-transform call.
struct TrainParams {
  CropRect crop;
  bool flip = false;
  double angle_deg = 0.0;
  JitterParams jitter;
  bool jitter_enabled = true;
};

TrainParams sample_train_params(std::size_t height, std::size_t width, const AugmentConfig& config,
                                Philox& rng);
PlanarImage apply_train_transform(const PlanarImage& preprocessed, const TrainParams& params,
                                  const AugmentConfig& config);
PlanarImage train_transform(const PlanarImage& preprocessed, const AugmentConfig& config, Philox& rng);

// Bilinear resize to out_size, then ImageNet normalization iff configured.
PlanarImage validation_transform(const PlanarImage& preprocessed, const AugmentConfig& config);
PlanarImage validation_transform(const detector::JetWindow& window,
                                 const preprocess::ChannelStats& stats, const AugmentConfig& config,
                                 const preprocess::PreprocConfig& preproc = {});

// A batch of flattened samples with probability-vector labels.
struct Batch {
  std::size_t size = 0, sample_size = 0, num_classes = 0;
  std::vector<float> images;   // [size][sample_size]
  std::vector<double> labels;  // [size][num_classes]
};

double sample_mixup_lambda(double alpha, Philox& rng);
// lambda * a + (1 - lambda) * b for images and labels. The last label entry
// is completed as 1 - sum(others) so every row stays on the simplex.
Batch mixup(const Batch& a, const Batch& b, double lambda);

}  // namespace jqg::augment

// SPDX-License-Identifier: Apache-2.0
#include "jqg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jqg/errors.hpp"

namespace jqg::augment {

namespace {

float clamp255(double v) { return static_cast<float>(std::clamp(v, 0.0, 255.0)); }

// Source coordinate and weights for one output index of a half-pixel-centre
// bilinear resize.
struct Tap {
  std::size_t i0, i1;
  double w1;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    t[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return t;
}

template <class Get, class Set>
void resize_plane(std::size_t in_h, std::size_t in_w, std::size_t out_h, std::size_t out_w, Get get,
                  Set set) {
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& b = tx[x];
      const double top = get(a.i0, b.i0) * (1.0 - b.w1) + get(a.i0, b.i1) * b.w1;
      const double bot = get(a.i1, b.i0) * (1.0 - b.w1) + get(a.i1, b.i1) * b.w1;
      set(y, x, top * (1.0 - a.w1) + bot * a.w1);
    }
  }
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = (g - b) / delta;
  else if (mx == g)
    h = 2.0 + (b - r) / delta;
  else
    h = 4.0 + (r - g) / delta;
  h /= 6.0;
  h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  const double hh = (h - std::floor(h)) * 6.0;
  const auto sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

}  // namespace

void AugmentConfig::validate() const {
  if (!(crop_scale_lo > 0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1))
    throw DomainError("crop scale must satisfy 0 < lo <= hi <= 1");
  if (!(crop_ratio_lo > 0 && crop_ratio_lo <= crop_ratio_hi))
    throw DomainError("crop ratio range is invalid");
  if (!(flip_prob >= 0 && flip_prob <= 1)) throw DomainError("flip probability outside [0, 1]");
  if (!(mixup_alpha > 0)) throw DomainError("mixup alpha must be positive");
  if (out_size == 0) throw DomainError("output size must be positive");
}

PlanarImage make_planar(std::span<const float> chw, std::size_t height, std::size_t width) {
  if (chw.size() != kChannels * height * width) throw ShapeError("planar image size mismatch");
  PlanarImage img(height, width);
  std::copy(chw.begin(), chw.end(), img.data.begin());
  return img;
}

Uint8Image to_uint8(const PlanarImage& image) {
  Uint8Image out{image.height, image.width,
                 std::vector<std::uint8_t>(image.height * image.width * kChannels)};
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t y = 0; y < image.height; ++y)
      for (std::size_t x = 0; x < image.width; ++x) {
        // nearbyint honours the default round-to-nearest-even mode.
        const double v = std::nearbyint(static_cast<double>(image.at(c, y, x)) * 255.0);
        out.data[(y * image.width + x) * kChannels + c] =
            static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
  return out;
}

Image to_image(const Uint8Image& image) {
  Image out(image.height, image.width);
  std::transform(image.data.begin(), image.data.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

PlanarImage to_float(const Image& image) {
  PlanarImage out(image.height, image.width);
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t y = 0; y < image.height; ++y)
      for (std::size_t x = 0; x < image.width; ++x)
        out.at(c, y, x) = static_cast<float>(static_cast<double>(image.at(y, x, c)) / 255.0);
  return out;
}

PlanarImage to_float(const Uint8Image& image) { return to_float(to_image(image)); }

PlanarImage imagenet_normalize(const PlanarImage& image) {
  PlanarImage out = image;
  const std::size_t n = image.height * image.width;
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t i = 0; i < n; ++i)
      out.data[c * n + i] = static_cast<float>(
          (static_cast<double>(image.data[c * n + i]) - kImagenetMean[c]) / kImagenetStd[c]);
  return out;
}

PlanarImage imagenet_denormalize(const PlanarImage& image) {
  PlanarImage out = image;
  const std::size_t n = image.height * image.width;
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t i = 0; i < n; ++i)
      out.data[c * n + i] = static_cast<float>(
          static_cast<double>(image.data[c * n + i]) * kImagenetStd[c] + kImagenetMean[c]);
  return out;
}

PlanarImage resize_bilinear(const PlanarImage& image, std::size_t out_h, std::size_t out_w) {
  PlanarImage out(out_h, out_w);
  for (std::size_t c = 0; c < kChannels; ++c)
    resize_plane(
        image.height, image.width, out_h, out_w,
        [&](std::size_t y, std::size_t x) { return static_cast<double>(image.at(c, y, x)); },
        [&](std::size_t y, std::size_t x, double v) { out.at(c, y, x) = static_cast<float>(v); });
  return out;
}

Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w) {
  Image out(out_h, out_w);
  for (std::size_t c = 0; c < kChannels; ++c)
    resize_plane(
        image.height, image.width, out_h, out_w,
        [&](std::size_t y, std::size_t x) { return static_cast<double>(image.at(y, x, c)); },
        [&](std::size_t y, std::size_t x, double v) { out.at(y, x, c) = static_cast<float>(v); });
  return out;
}

CropRect sample_crop(std::size_t height, std::size_t width, const AugmentConfig& config,
                     Philox& rng) {
  const double area = static_cast<double>(height * width);
  const double log_lo = std::log(config.crop_ratio_lo);
  const double log_hi = std::log(config.crop_ratio_hi);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(config.crop_scale_lo, config.crop_scale_hi);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      const auto top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(height - h)));
      const auto left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(width - w)));
      return {top, left, h, w};
    }
  }
  // Fallback: centre crop of the whole image, aspect clamped into range.
  const double in_ratio = static_cast<double>(width) / static_cast<double>(height);
  std::size_t w = width, h = height;
  if (in_ratio < config.crop_ratio_lo) {
    h = static_cast<std::size_t>(std::lround(static_cast<double>(w) / config.crop_ratio_lo));
  } else if (in_ratio > config.crop_ratio_hi) {
    w = static_cast<std::size_t>(std::lround(static_cast<double>(h) * config.crop_ratio_hi));
  }
  return {(height - h) / 2, (width - w) / 2, h, w};
}

Image resized_crop(const Image& image, const CropRect& rect, std::size_t out_size) {
  if (rect.height == 0 || rect.width == 0 || rect.top + rect.height > image.height ||
      rect.left + rect.width > image.width)
    throw ShapeError("crop rectangle outside the image");
  Image crop(rect.height, rect.width);
  for (std::size_t y = 0; y < rect.height; ++y)
    for (std::size_t x = 0; x < rect.width; ++x)
      for (std::size_t c = 0; c < kChannels; ++c)
        crop.at(y, x, c) = image.at(rect.top + y, rect.left + x, c);
  return resize_bilinear(crop, out_size, out_size);
}

Image random_resized_crop(const Image& image, const AugmentConfig& config, Philox& rng) {
  return resized_crop(image, sample_crop(image.height, image.width, config, rng), config.out_size);
}

Image hflip(const Image& image) {
  Image out(image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < kChannels; ++c)
        out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
  return out;
}

Image random_hflip(const Image& image, double p, Philox& rng) {
  return rng.uniform() < p ? hflip(image) : image;
}

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const auto h = static_cast<std::ptrdiff_t>(image.height);
  const auto w = static_cast<std::ptrdiff_t>(image.width);
  Image out(image.height, image.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      // Inverse map of a counter-clockwise rotation (y axis points down).
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double sx = cs * dx - sn * dy + cx;
      const double sy = sn * dx + cs * dy + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
      const double ax = sx - fx, ay = sy - fy;
      for (std::size_t c = 0; c < kChannels; ++c) {
        auto px = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) return 0.0;
          return image.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c);
        };
        const double v = (px(y0, x0) * (1 - ax) + px(y0, x0 + 1) * ax) * (1 - ay) +
                         (px(y0 + 1, x0) * (1 - ax) + px(y0 + 1, x0 + 1) * ax) * ay;
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Image random_rotate(const Image& image, double max_deg, Philox& rng) {
  return rotate(image, rng.uniform(-max_deg, max_deg));
}

JitterParams sample_jitter(const AugmentConfig& config, Philox& rng) {
  JitterParams p;
  const double lo = std::max(0.0, 1.0 - config.jitter_bcs), hi = 1.0 + config.jitter_bcs;
  p.brightness = rng.uniform(lo, hi);
  p.contrast = rng.uniform(lo, hi);
  p.saturation = rng.uniform(lo, hi);
  p.hue = rng.uniform(-config.jitter_hue, config.jitter_hue);
  for (int i = 3; i > 0; --i) std::swap(p.order[i], p.order[rng.uniform_int(0, i)]);
  return p;
}

Image apply_jitter(const Image& image, const JitterParams& params) {
  Image out = image;
  const std::size_t n = image.height * image.width;
  for (int stage : params.order) {
    switch (stage) {
      case 0:
        for (float& v : out.data) v = clamp255(v * params.brightness);
        break;
      case 1: {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          mean += luminance(out.data[3 * i], out.data[3 * i + 1], out.data[3 * i + 2]);
        mean /= static_cast<double>(std::max<std::size_t>(n, 1));
        for (float& v : out.data) v = clamp255(params.contrast * v + (1.0 - params.contrast) * mean);
        break;
      }
      case 2:
        for (std::size_t i = 0; i < n; ++i) {
          float* px = &out.data[3 * i];
          const double gray = luminance(px[0], px[1], px[2]);
          for (int c = 0; c < 3; ++c)
            px[c] = clamp255(params.saturation * px[c] + (1.0 - params.saturation) * gray);
        }
        break;
      case 3:
        if (params.hue == 0.0) break;
        for (std::size_t i = 0; i < n; ++i) {
          float* px = &out.data[3 * i];
          double h, s, v;
          rgb_to_hsv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0, h, s, v);
          if (s <= 0.0) continue;
          double r, g, b;
          hsv_to_rgb(h + params.hue, s, v, r, g, b);
          px[0] = clamp255(r * 255.0);
          px[1] = clamp255(g * 255.0);
          px[2] = clamp255(b * 255.0);
        }
        break;
      default:
        throw DomainError("unknown jitter stage");
    }
  }
  return out;
}

Image color_jitter(const Image& image, const AugmentConfig& config, Philox& rng) {
  return apply_jitter(image, sample_jitter(config, rng));
}

TrainParams sample_train_params(std::size_t height, std::size_t width, const AugmentConfig& config,
                                Philox& rng) {
  TrainParams p;
  p.crop = sample_crop(height, width, config, rng);
  p.flip = rng.uniform() < config.flip_prob;
  p.angle_deg = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg);
  p.jitter_enabled = config.color_jitter;
  if (config.color_jitter) p.jitter = sample_jitter(config, rng);
  return p;
}

PlanarImage apply_train_transform(const PlanarImage& preprocessed, const TrainParams& params,
                                  const AugmentConfig& config) {
  Image img = to_image(to_uint8(preprocessed));
  img = resized_crop(img, params.crop, config.out_size);
  if (params.flip) img = hflip(img);
  img = rotate(img, params.angle_deg);
  if (params.jitter_enabled) img = apply_jitter(img, params.jitter);
  PlanarImage out = to_float(img);
  return config.imagenet_normalize ? imagenet_normalize(out) : out;
}

PlanarImage train_transform(const PlanarImage& preprocessed, const AugmentConfig& config,
                            Philox& rng) {
  return apply_train_transform(
      preprocessed, sample_train_params(preprocessed.height, preprocessed.width, config, rng), config);
}

PlanarImage validation_transform(const PlanarImage& preprocessed, const AugmentConfig& config) {
  PlanarImage out = resize_bilinear(preprocessed, config.out_size, config.out_size);
  return config.imagenet_normalize ? imagenet_normalize(out) : out;
}

PlanarImage validation_transform(const detector::JetWindow& window,
                                 const preprocess::ChannelStats& stats, const AugmentConfig& config,
                                 const preprocess::PreprocConfig& preproc) {
  const auto pre = preprocess::preprocess_window(window, stats, preproc);
  return validation_transform(make_planar(pre, detector::kWindowSize, detector::kWindowSize), config);
}

double sample_mixup_lambda(double alpha, Philox& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  if (x + y <= 0.0) return rng.uniform() < 0.5 ? 0.0 : 1.0;
  return x / (x + y);
}

Batch mixup(const Batch& a, const Batch& b, double lambda) {
  if (a.size != b.size || a.sample_size != b.sample_size || a.num_classes != b.num_classes ||
      a.images.size() != b.images.size() || a.labels.size() != b.labels.size())
    throw ShapeError("mixup batches must have identical shapes");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixup lambda outside [0, 1]");
  Batch out = a;
  for (std::size_t i = 0; i < a.images.size(); ++i)
    out.images[i] = static_cast<float>(lambda * a.images[i] + (1.0 - lambda) * b.images[i]);
  const std::size_t k = a.num_classes;
  for (std::size_t s = 0; s < a.size; ++s) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      const double v = lambda * a.labels[s * k + j] + (1.0 - lambda) * b.labels[s * k + j];
      out.labels[s * k + j] = v;
      acc += v;
    }
    if (k > 0) out.labels[s * k + k - 1] = std::max(0.0, 1.0 - acc);
  }
  return out;
}

}  // namespace jqg::augment

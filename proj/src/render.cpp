// SPDX-License-Identifier: Apache-2.0
#include "jqg/render.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jqg/datastore.hpp"
#include "jqg/errors.hpp"

namespace jqg::render {

using detector::kWindowSize;

Scale parse_scale(std::string_view name) {
  if (name == "linear") return Scale::Linear;
  if (name == "log") return Scale::Log;
  throw DomainError("unknown scale '" + std::string(name) + "' (linear|log)");
}

detector::Channel parse_channel(std::string_view name) {
  if (name == "track") return detector::Channel::Track;
  if (name == "ecal") return detector::Channel::Ecal;
  if (name == "hcal") return detector::Channel::Hcal;
  throw DomainError("unknown channel '" + std::string(name) + "' (track|ecal|hcal)");
}

detector::JetLabel parse_label(std::string_view name) {
  if (name == "q" || name == "quark") return detector::JetLabel::Quark;
  if (name == "g" || name == "gluon") return detector::JetLabel::Gluon;
  throw DomainError("unknown label '" + std::string(name) + "' (q|g)");
}

std::vector<double> mean_map(std::span<const detector::JetWindow> windows, detector::JetLabel label,
                             detector::Channel channel) {
  std::vector<double> acc(kWindowSize * kWindowSize, 0.0);
  std::size_t n = 0;
  const auto ch = static_cast<std::size_t>(channel);
  for (const auto& w : windows) {
    if (w.label != label) continue;
    ++n;
    for (std::size_t r = 0; r < kWindowSize; ++r)
      for (std::size_t c = 0; c < kWindowSize; ++c) acc[r * kWindowSize + c] += w.at(ch, r, c);
  }
  if (n == 0) throw DomainError("no windows carry the requested label");
  for (double& v : acc) v /= static_cast<double>(n);
  return acc;
}

GrayImage to_gray(std::span<const double> map, std::size_t width, std::size_t height, Scale scale) {
  if (map.size() != width * height || map.empty()) throw ShapeError("map size does not match dimensions");
  std::vector<double> v(map.begin(), map.end());
  if (scale == Scale::Log)
    for (double& x : v) x = std::log10(x + 1e-6);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double min = *lo, range = *hi - *lo;
  GrayImage img{width, height, std::vector<std::uint8_t>(v.size(), 0)};
  if (range > 0)
    for (std::size_t i = 0; i < v.size(); ++i)
      img.pixels[i] = static_cast<std::uint8_t>(std::nearbyint((v[i] - min) / range * 255.0));
  return img;
}

GrayImage render_intensity_map(std::span<const detector::JetWindow> windows, detector::JetLabel label,
                               detector::Channel channel, Scale scale) {
  return to_gray(mean_map(windows, label, channel), kWindowSize, kWindowSize, scale);
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  datastore::write_file(path, encode_pgm(image));
}

}  // namespace jqg::render

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Average intensity maps written as binary PGM.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "jqg/detector_image.hpp"

namespace jqg::render {

enum class Scale { Linear, Log };
Scale parse_scale(std::string_view name);
detector::Channel parse_channel(std::string_view name);
detector::JetLabel parse_label(std::string_view name);  // "q" / "g"

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

// Per-pixel mean of one channel over the windows carrying `label`; LOG maps
// v -> log10(v + 1e-6) first. The result is stretched affinely onto 0..255
// (a flat map renders as all zeros). Throws DomainError on an empty selection.
std::vector<double> mean_map(std::span<const detector::JetWindow> windows, detector::JetLabel label,
                             detector::Channel channel);
GrayImage to_gray(std::span<const double> map, std::size_t width, std::size_t height, Scale scale);
GrayImage render_intensity_map(std::span<const detector::JetWindow> windows, detector::JetLabel label,
                               detector::Channel channel, Scale scale);

std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace jqg::render

// SPDX-License-Identifier: Apache-2.0
#include "jqg/detector_image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "jqg/errors.hpp"

namespace jqg::detector {

namespace {

std::size_t channel_index(Channel ch) { return static_cast<std::size_t>(ch); }

}  // namespace

void GridSpec::validate() const {
  if (hcal_factor == 0 || n_eta == 0 || n_phi == 0 || n_eta % hcal_factor != 0 ||
      n_phi % hcal_factor != 0)
    throw DomainError("grid dimensions must be whole multiples of the HCAL tower factor");
  if (!(eta_max > eta_min)) throw DomainError("grid eta range is empty");
}

double wrap_phi(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (phi > -std::numbers::pi && phi <= std::numbers::pi) return phi;
  double r = std::remainder(phi, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

std::optional<Cell> locate(double eta, double phi, const GridSpec& spec) {
  if (!(eta >= spec.eta_min && eta < spec.eta_max)) return std::nullopt;
  const double u = (eta - spec.eta_min) / (spec.eta_max - spec.eta_min);
  auto row = static_cast<std::size_t>(std::floor(u * static_cast<double>(spec.n_eta)));
  if (row >= spec.n_eta) row = spec.n_eta - 1;
  const double v = (wrap_phi(phi) + std::numbers::pi) / (2.0 * std::numbers::pi);
  auto col = static_cast<std::size_t>(std::floor(v * static_cast<double>(spec.n_phi)));
  col %= spec.n_phi;
  return Cell{row, col};
}

FullDetectorImage::FullDetectorImage(const GridSpec& spec)
    : spec_(spec),
      data_(kChannels * spec.n_eta * spec.n_phi, 0.0f),
      towers_(spec.tower_rows() * spec.tower_cols(), 0.0f) {
  spec_.validate();
}

float& FullDetectorImage::at(Channel ch, std::size_t row, std::size_t col) {
  return data_[(channel_index(ch) * spec_.n_eta + row) * spec_.n_phi + col];
}

float FullDetectorImage::at(Channel ch, std::size_t row, std::size_t col) const {
  return data_[(channel_index(ch) * spec_.n_eta + row) * spec_.n_phi + col];
}

std::span<const float> FullDetectorImage::channel(Channel ch) const {
  const std::size_t n = spec_.n_eta * spec_.n_phi;
  return std::span<const float>(data_).subspan(channel_index(ch) * n, n);
}

std::span<float> FullDetectorImage::channel(Channel ch) {
  const std::size_t n = spec_.n_eta * spec_.n_phi;
  return std::span<float>(data_).subspan(channel_index(ch) * n, n);
}

FullDetectorImage bin_hits(std::span<const DetectorHit> hits, const GridSpec& spec,
                           BinDiagnostics* diagnostics) {
  FullDetectorImage image(spec);
  BinDiagnostics diag;
  auto towers = image.towers();
  for (const DetectorHit& hit : hits) {
    if (!std::isfinite(hit.eta) || !std::isfinite(hit.phi) || !std::isfinite(hit.value) ||
        hit.value < 0.0)
      throw DomainError("detector hit must have finite coordinates and non-negative value");
    const auto cell = locate(hit.eta, hit.phi, spec);
    if (!cell) {
      ++diag.dropped_eta;
      continue;
    }
    ++diag.accepted;
    if (hit.channel == Channel::Hcal) {
      const std::size_t tr = cell->row / spec.hcal_factor;
      const std::size_t tc = cell->col / spec.hcal_factor;
      towers[tr * spec.tower_cols() + tc] += static_cast<float>(hit.value);
    } else {
      image.at(hit.channel, cell->row, cell->col) += static_cast<float>(hit.value);
    }
  }
  const auto fine = upsample_hcal(towers, spec);
  std::copy(fine.begin(), fine.end(), image.channel(Channel::Hcal).begin());
  if (diagnostics != nullptr) *diagnostics = diag;
  return image;
}

std::vector<float> upsample_hcal(std::span<const float> native, const GridSpec& spec) {
  const std::size_t rows = spec.tower_rows(), cols = spec.tower_cols();
  if (native.size() != rows * cols)
    throw ShapeError("HCAL tower grid must be " + std::to_string(rows) + "x" + std::to_string(cols));
  std::vector<float> fine(spec.n_eta * spec.n_phi);
  for (std::size_t r = 0; r < spec.n_eta; ++r) {
    const float* src = native.data() + (r / spec.hcal_factor) * cols;
    float* dst = fine.data() + r * spec.n_phi;
    for (std::size_t c = 0; c < spec.n_phi; ++c) dst[c] = src[c / spec.hcal_factor];
  }
  return fine;
}

double eta_from_theta(double theta) {
  if (!(theta > 0.0 && theta < std::numbers::pi))
    throw DomainError("polar angle must lie strictly inside (0, pi)");
  return -std::log(std::tan(theta / 2.0));
}

double pt_from_components(double px, double py) { return std::hypot(px, py); }

WindowCenter find_window_center(const FullDetectorImage& image, double jet_eta, double jet_phi) {
  const GridSpec& spec = image.spec();
  const auto cell = locate(jet_eta, jet_phi, spec);
  if (!cell) throw EtaOutOfRange("jet axis outside the detector eta range");
  const auto rows = static_cast<std::ptrdiff_t>(spec.tower_rows());
  const auto cols = static_cast<std::ptrdiff_t>(spec.tower_cols());
  const auto tr = static_cast<std::ptrdiff_t>(cell->row / spec.hcal_factor);
  const auto tc = static_cast<std::ptrdiff_t>(cell->col / spec.hcal_factor);
  constexpr auto half = static_cast<std::ptrdiff_t>(kNeighborhood / 2);

  std::ptrdiff_t best_r = tr, best_c = tc;
  float best = 0.0f;
  bool found = false;
  for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(0, tr - half);
       r <= std::min<std::ptrdiff_t>(rows - 1, tr + half); ++r) {
    for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
      const std::ptrdiff_t c = ((tc + dc) % cols + cols) % cols;
      const float v = image.tower(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      if (!(v > 0.0f)) continue;
      if (!found || v > best || (v == best && (r < best_r || (r == best_r && c < best_c)))) {
        best = v;
        best_r = r;
        best_c = c;
        found = true;
      }
    }
  }
  const std::size_t offset = spec.hcal_factor / 2;
  return {static_cast<std::size_t>(best_r) * spec.hcal_factor + offset,
          static_cast<std::size_t>(best_c) * spec.hcal_factor + offset};
}

JetWindow crop_jet_window(const FullDetectorImage& image, WindowCenter center) {
  const GridSpec& spec = image.spec();
  if (center.row < kWindowHalf || center.row + kWindowHalf >= spec.n_eta)
    throw EtaOutOfRange("window centre row " + std::to_string(center.row) +
                        " leaves no room for a full eta extent");
  JetWindow window;
  window.center_row = center.row;
  window.center_col = center.col % spec.n_phi;
  const std::size_t row0 = center.row - kWindowHalf;
  const std::size_t col0 = (center.col % spec.n_phi) + spec.n_phi - kWindowHalf;
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const auto plane = image.channel(static_cast<Channel>(ch));
    for (std::size_t r = 0; r < kWindowSize; ++r) {
      const float* src = plane.data() + (row0 + r) * spec.n_phi;
      for (std::size_t c = 0; c < kWindowSize; ++c)
        window.at(ch, r, c) = src[(col0 + c) % spec.n_phi];
    }
  }
  return window;
}

}  // namespace jqg::detector

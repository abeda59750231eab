// SPDX-License-Identifier: Apache-2.0
#pragma once

// Detector hits -> 3-channel eta/phi images -> 125x125 jet windows.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace jqg::detector {

enum class Channel : std::uint8_t { Track = 0, Ecal = 1, Hcal = 2 };
inline constexpr std::size_t kChannels = 3;

enum class JetLabel : std::uint8_t { Gluon = 0, Quark = 1 };

struct DetectorHit {
  double eta = 0.0;
  double phi = 0.0;    // radians, wrapped into (-pi, pi] on binning
  double value = 0.0;  // GeV: energy for ECAL/HCAL, pT for tracks
  Channel channel = Channel::Ecal;
};

struct GridSpec {
  std::size_t n_eta = 280;
  std::size_t n_phi = 360;
  double eta_min = -3.0;
  double eta_max = 3.0;
  std::size_t hcal_factor = 5;

  std::size_t tower_rows() const { return n_eta / hcal_factor; }
  std::size_t tower_cols() const { return n_phi / hcal_factor; }
  // Throws DomainError if the fine grid is not a whole number of towers.
  void validate() const;
};

// Fine-grid cell for (eta, phi); nullopt when eta is outside [eta_min, eta_max).
struct Cell {
  std::size_t row, col;
};
std::optional<Cell> locate(double eta, double phi, const GridSpec& spec);

// Wraps any finite angle into (-pi, pi].
double wrap_phi(double phi);

class FullDetectorImage {
 public:
  explicit FullDetectorImage(const GridSpec& spec = {});

  const GridSpec& spec() const { return spec_; }
  float& at(Channel ch, std::size_t row, std::size_t col);
  float at(Channel ch, std::size_t row, std::size_t col) const;
  std::span<const float> channel(Channel ch) const;
  std::span<float> channel(Channel ch);
  std::span<const float> data() const { return data_; }

  // Native HCAL tower grid [tower_rows][tower_cols]; the fine HCAL channel is
  // its block-replicated upsampling.
  std::span<const float> towers() const { return towers_; }
  std::span<float> towers() { return towers_; }
  float tower(std::size_t row, std::size_t col) const { return towers_[row * spec_.tower_cols() + col]; }

 private:
  GridSpec spec_;
  std::vector<float> data_;
  std::vector<float> towers_;
};

struct BinDiagnostics {
  std::size_t accepted = 0;
  std::size_t dropped_eta = 0;
};

// Sums hits into the fine grid (TRACK, ECAL) and the native tower grid (HCAL,
// then upsampled). Hits with |eta| outside the grid are dropped and counted.
FullDetectorImage bin_hits(std::span<const DetectorHit> hits, const GridSpec& spec = {},
                           BinDiagnostics* diagnostics = nullptr);

// Replicates each tower value into its hcal_factor x hcal_factor fine block.
std::vector<float> upsample_hcal(std::span<const float> native, const GridSpec& spec = {});

double eta_from_theta(double theta);
double pt_from_components(double px, double py);

struct WindowCenter {
  std::size_t row, col;  // fine-grid indices
};

// Highest-energy HCAL tower in the 9x9 tower neighborhood of the jet axis,
// returned as the centre pixel of that tower's fine block.
WindowCenter find_window_center(const FullDetectorImage& image, double jet_eta, double jet_phi);

inline constexpr std::size_t kWindowSize = 125;
inline constexpr std::size_t kWindowHalf = kWindowSize / 2;
inline constexpr std::size_t kNeighborhood = 9;

struct JetWindow {
  std::vector<float> data = std::vector<float>(kChannels * kWindowSize * kWindowSize, 0.0f);
  std::size_t center_row = 0;
  std::size_t center_col = 0;
  std::optional<JetLabel> label;

  float& at(std::size_t ch, std::size_t row, std::size_t col) {
    return data[(ch * kWindowSize + row) * kWindowSize + col];
  }
  float at(std::size_t ch, std::size_t row, std::size_t col) const {
    return data[(ch * kWindowSize + row) * kWindowSize + col];
  }
};

// Throws EtaOutOfRange unless a full 125-row extent fits around center.row;
// columns wrap modulo n_phi.
JetWindow crop_jet_window(const FullDetectorImage& image, WindowCenter center);

}  // namespace jqg::detector

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Toy quark/gluon jet generator. Gluon jets get more, softer and wider
// radiation than quark jets; the presets control how far apart the classes are.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "jqg/detector_image.hpp"
#include "jqg/rng.hpp"

namespace jqg::synth {

enum class Separability { Easy, Paperlike, Hard };

Separability parse_separability(std::string_view name);
std::string_view to_string(Separability s);

struct SynthConfig {
  double mean_mult_quark = 12.0;
  double mean_mult_gluon = 27.0;
  double width_quark = 0.08;
  double width_gluon = 0.16;
  double pt_min = 90.0;
  double pt_max = 170.0;
  double charged_frac = 0.60;
  double photon_frac = 0.25;
  double neutral_had_frac = 0.15;
  // Jet axes are drawn uniformly in |eta| < axis_eta_max. The default keeps
  // every 9x9-tower recentred window inside the croppable eta band.
  double axis_eta_max = 1.2;
  Separability separability = Separability::Easy;
  std::uint64_t seed = 1;

  void validate() const;
  static SynthConfig preset(Separability s, std::uint64_t seed = 1);
};

struct JetEvent {
  std::vector<detector::DetectorHit> hits;
  double true_eta = 0.0;
  double true_phi = 0.0;
  detector::JetLabel label = detector::JetLabel::Gluon;
  double jet_pt = 0.0;
  std::size_t n_particles = 0;
};

JetEvent sample_jet(const SynthConfig& config, detector::JetLabel label, Philox& rng);

// pT > 70 GeV and |eta| < 1.8.
bool apply_selection(const JetEvent& event);

// Exactly n_per_class windows per label, shuffled by config.seed. Each output
// slot draws from its own Philox stream, so the result does not depend on the
// number of threads.
std::vector<detector::JetWindow> generate_dataset(const SynthConfig& config,
                                                  std::size_t n_per_class,
                                                  const detector::GridSpec& grid = {});

// Stream used for attempt `attempt` of output slot `slot` of class `label`.
Philox event_stream(const SynthConfig& config, detector::JetLabel label, std::size_t slot,
                    std::size_t attempt);

}  // namespace jqg::synth

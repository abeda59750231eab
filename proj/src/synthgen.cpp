// SPDX-License-Identifier: Apache-2.0
#include "jqg/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "jqg/errors.hpp"
#include "jqg/kernels.hpp"

namespace jqg::synth {

using detector::Channel;
using detector::DetectorHit;
using detector::JetLabel;
using detector::JetWindow;

Separability parse_separability(std::string_view name) {
  if (name == "easy") return Separability::Easy;
  if (name == "paperlike") return Separability::Paperlike;
  if (name == "hard") return Separability::Hard;
  throw DomainError("unknown separability preset '" + std::string(name) + "'");
}

std::string_view to_string(Separability s) {
  switch (s) {
    case Separability::Easy: return "easy";
    case Separability::Paperlike: return "paperlike";
    case Separability::Hard: return "hard";
  }
  return "easy";
}

void SynthConfig::validate() const {
  if (std::abs(charged_frac + photon_frac + neutral_had_frac - 1.0) > 1e-9)
    throw DomainError("species fractions must sum to 1");
  if (charged_frac < 0 || photon_frac < 0 || neutral_had_frac < 0)
    throw DomainError("species fractions must be non-negative");
  if (!(width_quark > 0 && width_gluon > 0)) throw DomainError("jet widths must be positive");
  if (!(mean_mult_quark > 0 && mean_mult_gluon > 0))
    throw DomainError("mean multiplicities must be positive");
  if (!(pt_max >= pt_min && pt_min >= 0)) throw DomainError("bad jet pT range");
  if (!(axis_eta_max >= 0)) throw DomainError("axis eta range must be non-negative");
}

SynthConfig SynthConfig::preset(Separability s, std::uint64_t seed) {
  SynthConfig c;
  c.separability = s;
  c.seed = seed;
  switch (s) {
    case Separability::Easy:
      break;
    case Separability::Paperlike:
      c.width_quark = 0.10;
      c.width_gluon = 0.14;
      c.mean_mult_quark = 16;
      c.mean_mult_gluon = 22;
      break;
    case Separability::Hard:
      c.width_quark = 0.11;
      c.width_gluon = 0.125;
      c.mean_mult_quark = 18;
      c.mean_mult_gluon = 21;
      break;
  }
  return c;
}

JetEvent sample_jet(const SynthConfig& config, JetLabel label, Philox& rng) {
  const bool quark = label == JetLabel::Quark;
  const double mean_mult = quark ? config.mean_mult_quark : config.mean_mult_gluon;
  const double width = quark ? config.width_quark : config.width_gluon;

  JetEvent ev;
  ev.label = label;
  ev.true_eta = rng.uniform(-config.axis_eta_max, config.axis_eta_max);
  ev.true_phi = detector::wrap_phi(rng.uniform(-std::numbers::pi, std::numbers::pi));
  ev.jet_pt = rng.uniform(config.pt_min, config.pt_max);

  // 1 + Poisson(mean - 1): at least one particle, mean preserved.
  std::size_t n = 1;
  if (mean_mult > 1.0) {
    std::poisson_distribution<int> extra(mean_mult - 1.0);
    n += static_cast<std::size_t>(extra(rng));
  }
  ev.n_particles = n;

  // Symmetric Dirichlet(1) momentum fractions.
  std::vector<double> frac(n);
  double total = 0.0;
  for (double& f : frac) {
    f = -std::log1p(-rng.uniform());
    total += f;
  }

  std::normal_distribution<double> offset(0.0, width);
  ev.hits.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    double deta = 0.0, dphi = 0.0;
    do {
      deta = offset(rng);
      dphi = offset(rng);
    } while (deta * deta + dphi * dphi >= 1.0);
    const double eta = ev.true_eta + deta;
    const double phi = detector::wrap_phi(ev.true_phi + dphi);
    const double pt = ev.jet_pt * frac[i] / total;
    const double energy = pt * std::cosh(eta);
    const double species = rng.uniform();
    if (species < config.charged_frac) {
      ev.hits.push_back({eta, phi, pt, Channel::Track});
      ev.hits.push_back({eta, phi, energy, Channel::Ecal});
    } else if (species < config.charged_frac + config.photon_frac) {
      ev.hits.push_back({eta, phi, energy, Channel::Ecal});
    } else {
      ev.hits.push_back({eta, phi, energy, Channel::Hcal});
    }
  }
  return ev;
}

bool apply_selection(const JetEvent& event) {
  return event.jet_pt > 70.0 && std::abs(event.true_eta) < 1.8;
}

Philox event_stream(const SynthConfig& config, JetLabel label, std::size_t slot,
                    std::size_t attempt) {
  const std::uint64_t id =
      mix_stream(mix_stream(static_cast<std::uint64_t>(label), slot), attempt);
  return Philox(config.seed, id);
}

std::vector<JetWindow> generate_dataset(const SynthConfig& config, std::size_t n_per_class,
                                        const detector::GridSpec& grid) {
  config.validate();
  if (n_per_class == 0) throw DomainError("n_per_class must be at least 1");
  constexpr std::size_t kMaxAttempts = 10000;

  std::vector<JetWindow> out(2 * n_per_class);
  const auto total = static_cast<std::ptrdiff_t>(out.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) if (!kernels::deterministic())
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    try {
      const auto slot = static_cast<std::size_t>(k) / 2;
      const JetLabel label = (k % 2 == 0) ? JetLabel::Gluon : JetLabel::Quark;
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt == kMaxAttempts) throw DomainError("event selection rejects every sample");
        Philox rng = event_stream(config, label, slot, attempt);
        JetEvent ev = sample_jet(config, label, rng);
        if (!apply_selection(ev)) continue;
        const auto image = detector::bin_hits(ev.hits, grid);
        const auto center = detector::find_window_center(image, ev.true_eta, ev.true_phi);
        JetWindow w = detector::crop_jet_window(image, center);
        w.label = label;
        out[static_cast<std::size_t>(k)] = std::move(w);
        break;
      }
    } catch (...) {
#pragma omp critical(jqg_synth_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  Philox shuffle(config.seed, mix_stream(0x5348'5546'464C'4531ull, n_per_class));
  for (std::size_t i = out.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(out[i], out[j]);
  }
  return out;
}

}  // namespace jqg::synth

// SPDX-License-Identifier: Apache-2.0
#include "jqg/optim.hpp"

#include <cmath>
#include <string>

#include "jqg/errors.hpp"

namespace jqg::optim {

Kind parse_kind(std::string_view name) {
  if (name == "adamw") return Kind::AdamW;
  if (name == "adam") return Kind::Adam;
  if (name == "rmsprop") return Kind::RMSprop;
  if (name == "lion") return Kind::Lion;
  throw DomainError("unknown optimizer '" + std::string(name) + "' (adamw|adam|rmsprop|lion)");
}

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::AdamW: return "adamw";
    case Kind::Adam: return "adam";
    case Kind::RMSprop: return "rmsprop";
    case Kind::Lion: return "lion";
  }
  return "?";
}

namespace {

double sign(double x) { return (x > 0) - (x < 0); }

}  // namespace

template <class T>
void Optimizer::step(models::ParameterRegistry<T>& registry, double head_lr, double unfrozen_lr,
                     double weight_decay) {
  auto& entries = registry.entries();
  if (state_.size() < entries.size()) state_.resize(entries.size());
  const Hyper& h = hyper_;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (!e.trainable || !e.tensor.has_grad()) continue;
    const double lr = e.group == models::LrGroup::Head ? head_lr : unfrozen_lr;
    T* p = e.tensor.data();
    const T* g = e.tensor.grad().data();
    const std::size_t n = e.tensor.numel();
    State& s = state_[i];
    if (s.m.empty()) {
      s.m.assign(n, 0.0);
      if (kind_ != Kind::Lion) s.v.assign(n, 0.0);
    }
    ++s.t;
    switch (kind_) {
      case Kind::AdamW:
      case Kind::Adam: {
        const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
        const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
        const bool decoupled = kind_ == Kind::AdamW;
        for (std::size_t j = 0; j < n; ++j) {
          double pj = p[j];
          double gj = g[j];
          if (decoupled)
            pj *= 1.0 - lr * weight_decay;
          else
            gj += weight_decay * pj;
          s.m[j] = h.beta1 * s.m[j] + (1.0 - h.beta1) * gj;
          s.v[j] = h.beta2 * s.v[j] + (1.0 - h.beta2) * gj * gj;
          const double mhat = s.m[j] / c1, vhat = s.v[j] / c2;
          pj -= lr * mhat / (std::sqrt(vhat) + h.eps);
          p[j] = static_cast<T>(pj);
        }
        break;
      }
      case Kind::RMSprop:
        for (std::size_t j = 0; j < n; ++j) {
          double pj = p[j];
          const double gj = g[j] + weight_decay * pj;
          s.v[j] = h.rms_alpha * s.v[j] + (1.0 - h.rms_alpha) * gj * gj;
          pj -= lr * gj / (std::sqrt(s.v[j]) + h.eps);
          p[j] = static_cast<T>(pj);
        }
        break;
      case Kind::Lion:
        for (std::size_t j = 0; j < n; ++j) {
          double pj = p[j];
          const double gj = g[j];
          const double c = h.lion_beta1 * s.m[j] + (1.0 - h.lion_beta1) * gj;
          pj *= 1.0 - lr * weight_decay;
          pj -= lr * sign(c);
          s.m[j] = h.lion_beta2 * s.m[j] + (1.0 - h.lion_beta2) * gj;
          p[j] = static_cast<T>(pj);
        }
        break;
    }
  }
  ++steps_;
}

template void Optimizer::step(models::ParameterRegistry<float>&, double, double, double);
template void Optimizer::step(models::ParameterRegistry<double>&, double, double, double);

}  // namespace jqg::optim

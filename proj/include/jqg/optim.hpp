// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>
#include <vector>

#include "jqg/models.hpp"

namespace jqg::optim {

enum class Kind { AdamW, Adam, RMSprop, Lion };
Kind parse_kind(std::string_view name);
std::string_view to_string(Kind kind);

struct Hyper {
  double beta1 = 0.9, beta2 = 0.999;  // Adam / AdamW
  double lion_beta1 = 0.9, lion_beta2 = 0.99;
  double rms_alpha = 0.99;
  double eps = 1e-8;
};

// Per-parameter update with decoupled (AdamW, Lion) or L2-coupled (Adam,
// RMSprop) weight decay. Only trainable parameters holding a gradient are
// touched; state is created lazily per registry entry.
class Optimizer {
 public:
  explicit Optimizer(Kind kind, Hyper hyper = {}) : kind_(kind), hyper_(hyper) {}

  template <class T>
  void step(models::ParameterRegistry<T>& registry, double head_lr, double unfrozen_lr,
            double weight_decay);

  Kind kind() const { return kind_; }
  std::size_t steps() const { return steps_; }

 private:
  struct State {
    std::vector<double> m, v;
    std::size_t t = 0;
  };
  Kind kind_;
  Hyper hyper_;
  std::vector<State> state_;
  std::size_t steps_ = 0;
};

}  // namespace jqg::optim

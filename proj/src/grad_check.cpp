// SPDX-License-Identifier: Apache-2.0
#include "jqg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "jqg/errors.hpp"
#include "jqg/ops.hpp"

namespace jqg::ad {

GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs, double eps) {
  for (auto& x : inputs) {
    if (!x.requires_grad()) throw DomainError("grad_check: input does not require grad");
    x.zero_grad();
  }
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    Tensor<double> loss = f();
    tape.backward(loss);
  }
  GradCheckResult result;
  NoGradScope<double> off;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double>& x = inputs[k];
    const std::vector<double> analytic =
        x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                     : std::vector<double>(x.numel(), 0.0);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + eps;
      const double up = f().item();
      x.data()[i] = saved - eps;
      const double down = f().item();
      x.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err =
          std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = k;
        result.worst_index = i;
      }
    }
  }
  return result;
}

double grad_check(const ScalarFn& f, Tensor<double> x, double eps) {
  return grad_check(f, std::vector<Tensor<double>>{std::move(x)}, eps).max_rel_error;
}

RandomProjection::RandomProjection(const Shape& shape, std::uint64_t seed) {
  Philox rng(seed, 0x9e37);
  weights_ = random_tensor(shape, 1.0, rng, false);
}

Tensor<double> RandomProjection::operator()(const Tensor<double>& y) const {
  return sum(mul(y, weights_));
}

Tensor<double> random_tensor(const Shape& shape, double stddev, Philox& rng, bool requires_grad) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = normal(rng);
  return Tensor<double>(shape, std::move(v), requires_grad);
}

}  // namespace jqg::ad

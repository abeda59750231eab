// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central-difference gradient verification in double precision.

#include <functional>
#include <vector>

#include "jqg/rng.hpp"
#include "jqg/tensor.hpp"

namespace jqg::ad {

// Scalar-valued function of tensors it captures by handle.
using ScalarFn = std::function<Tensor<double>()>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0, worst_index = 0;
  std::size_t coordinates = 0;
};

// For every input x and coordinate i compares the taped gradient with
// (f(x + eps e_i) - f(x - eps e_i)) / 2eps. Error per coordinate is
// |a - n| / max(1e-8, |a| + |n|). Inputs must have requires_grad set.
GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                           double eps = 1e-6);

// Single-input convenience form; returns the max relative error.
double grad_check(const ScalarFn& f, Tensor<double> x, double eps = 1e-6);

// sum(y * R) for a fixed random R, turning any tensor output into a scalar
// whose gradient exercises every output coordinate.
class RandomProjection {
 public:
  RandomProjection(const Shape& shape, std::uint64_t seed);
  Tensor<double> operator()(const Tensor<double>& y) const;

 private:
  Tensor<double> weights_;
};

Tensor<double> random_tensor(const Shape& shape, double stddev, Philox& rng, bool requires_grad = true);

}  // namespace jqg::ad

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable operations on ad::Tensor. Matrices are rank-2 row-major;
// images are [B,C,H,W] (or [C,H,W] for conv2d).

#include <cstddef>
#include <vector>

#include "jqg/rng.hpp"
#include "jqg/tensor.hpp"

namespace jqg::ad {

enum class Mode { Train, Eval };

template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> transpose(const Tensor<T>& a);

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <class T> Tensor<T> sum(const Tensor<T>& a);
template <class T> Tensor<T> mean(const Tensor<T>& a);

// x[..., D] + b[D]
template <class T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b);
// x[R, D] + p[R mod S, D] for p[S, D]
template <class T> Tensor<T> add_tiled(const Tensor<T>& x, const Tensor<T>& p);

template <class T> Tensor<T> relu(const Tensor<T>& x);
// tanh approximation
template <class T> Tensor<T> gelu(const Tensor<T>& x);
// Inverted dropout; identity in Eval mode or when p == 0.
template <class T> Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, Philox* rng);

// Over the last axis, max-subtracted.
template <class T> Tensor<T> softmax(const Tensor<T>& x);
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5);

// mean_b( -sum_k y[b,k] * log softmax(z)[b,k] ); every target row must sum
// to 1 within 1e-6.
template <class T>
Tensor<T> cross_entropy_soft(const Tensor<T>& logits, const Tensor<T>& targets);

// Cross-correlation. input [C,H,W] or [B,C,H,W]; kernels [O,C,kh,kw].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride,
                 std::size_t padding);
// x[B,C,H,W] + b[C]
template <class T> Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b);
// [B,C,H,W] -> [B,C]
template <class T> Tensor<T> global_avg_pool(const Tensor<T>& x);
// Non-overlapping 2x2 mean: [B,C,H,W] -> [B,C,H/2,W/2]; H and W must be even.
template <class T> Tensor<T> avg_pool2(const Tensor<T>& x);

// [B,C,H,W] -> [B*N, C*p*p]; patches row-major over the grid, each flattened
// in (channel, row, col) order.
template <class T> Tensor<T> patchify(const Tensor<T>& images, std::size_t patch);

template <class T> Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <class T> Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <class T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <class T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <class T> Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& rows);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

}  // namespace jqg::ad

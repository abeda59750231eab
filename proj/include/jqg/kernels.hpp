// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense inner loops used by the autodiff engine and the data pipeline.
//
// Every kernel exists twice: `serial::` is the reference implementation and
// `omp::` the OpenMP-parallel one. The parallel versions partition work over
// independent output rows and keep the serial accumulation order inside each
// row, so both produce bit-identical results. The unqualified entry points
// dispatch to `omp::` unless deterministic mode is on (JQG_DETERMINISTIC=1)
// or the problem is too small to amortize a parallel region.

#include <cstddef>

namespace jqg::kernels {

// True when JQG_DETERMINISTIC is set to a non-empty value other than "0".
bool deterministic();

// Overrides the environment for the current process (tests, benchmarks).
void set_deterministic(bool on);

enum class Trans { No, Yes };

// C[m,n] (+)= op(A)[m,k] * op(B)[k,n], row-major, op = identity or transpose.
// A is stored as [m,k] (Trans::No) or [k,m] (Trans::Yes); likewise B.
struct GemmShape {
  std::size_t m, n, k;
};

// Conv geometry for im2col/col2im on a single [C,H,W] image.
struct ConvGeom {
  std::size_t channels, height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t stride, pad;
  std::size_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
  // Rows of the column matrix: C*kh*kw; columns: out_h*out_w.
  std::size_t col_rows() const { return channels * kernel_h * kernel_w; }
  std::size_t col_cols() const { return out_h() * out_w(); }
};

namespace serial {
template <class T>
void gemm(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c, bool accumulate);
template <class T>
void im2col(const ConvGeom& g, const T* image, T* col);
template <class T>
void col2im(const ConvGeom& g, const T* col, T* image);
}  // namespace serial

namespace omp {
template <class T>
void gemm(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c, bool accumulate);
template <class T>
void im2col(const ConvGeom& g, const T* image, T* col);
template <class T>
void col2im(const ConvGeom& g, const T* col, T* image);
}  // namespace omp

template <class T>
void gemm(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c, bool accumulate);
template <class T>
void im2col(const ConvGeom& g, const T* image, T* col);
template <class T>
void col2im(const ConvGeom& g, const T* col, T* image);

}  // namespace jqg::kernels

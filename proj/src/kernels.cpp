// SPDX-License-Identifier: Apache-2.0
#include "jqg/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string_view>

namespace jqg::kernels {

namespace {

std::atomic<int> g_deterministic{-1};

constexpr std::size_t kParallelWork = 1u << 15;

template <class T>
inline void gemm_row(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c,
                     bool accumulate, std::size_t i) {
  T* crow = c + i * s.n;
  if (!accumulate) std::memset(crow, 0, s.n * sizeof(T));
  if (tb == Trans::No) {
    for (std::size_t p = 0; p < s.k; ++p) {
      const T av = ta == Trans::No ? a[i * s.k + p] : a[p * s.m + i];
      const T* brow = b + p * s.n;
#pragma omp simd
      for (std::size_t j = 0; j < s.n; ++j) crow[j] += av * brow[j];
    }
    return;
  }
  // B stored [n,k]
  if (ta == Trans::No) {
    const T* arow = a + i * s.k;
    for (std::size_t j = 0; j < s.n; ++j) {
      const T* brow = b + j * s.k;
      T sum = 0;
#pragma omp simd reduction(+ : sum)
      for (std::size_t p = 0; p < s.k; ++p) sum += arow[p] * brow[p];
      crow[j] += sum;
    }
  } else {
    for (std::size_t j = 0; j < s.n; ++j) {
      const T* brow = b + j * s.k;
      T sum = 0;
      for (std::size_t p = 0; p < s.k; ++p) sum += a[p * s.m + i] * brow[p];
      crow[j] += sum;
    }
  }
}

template <class T>
inline void im2col_row(const ConvGeom& g, const T* image, T* col, std::size_t r) {
  const std::size_t kx = r % g.kernel_w;
  const std::size_t ky = (r / g.kernel_w) % g.kernel_h;
  const std::size_t ch = r / (g.kernel_w * g.kernel_h);
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const T* plane = image + ch * g.height * g.width;
  T* out = col + r * oh * ow;
  for (std::size_t oy = 0; oy < oh; ++oy) {
    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
      const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                          ix < static_cast<std::ptrdiff_t>(g.width);
      out[oy * ow + ox] = inside ? plane[iy * g.width + ix] : T(0);
    }
  }
}

template <class T>
inline void col2im_channel(const ConvGeom& g, const T* col, T* image, std::size_t ch) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  T* plane = image + ch * g.height * g.width;
  for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
      const std::size_t r = (ch * g.kernel_h + ky) * g.kernel_w + kx;
      const T* in = col + r * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
          plane[iy * g.width + ix] += in[oy * ow + ox];
        }
      }
    }
  }
}

}  // namespace

bool deterministic() {
  int v = g_deterministic.load(std::memory_order_relaxed);
  if (v < 0) {
    const char* env = std::getenv("JQG_DETERMINISTIC");
    v = (env != nullptr && *env != '\0' && std::string_view(env) != "0") ? 1 : 0;
    g_deterministic.store(v, std::memory_order_relaxed);
  }
  return v == 1;
}

void set_deterministic(bool on) { g_deterministic.store(on ? 1 : 0, std::memory_order_relaxed); }

namespace serial {

template <class T>
void gemm(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < s.m; ++i) gemm_row(ta, tb, s, a, b, c, accumulate, i);
}

template <class T>
void im2col(const ConvGeom& g, const T* image, T* col) {
  for (std::size_t r = 0; r < g.col_rows(); ++r) im2col_row(g, image, col, r);
}

template <class T>
void col2im(const ConvGeom& g, const T* col, T* image) {
  for (std::size_t ch = 0; ch < g.channels; ++ch) col2im_channel(g, col, image, ch);
}

}  // namespace serial

namespace omp {

template <class T>
void gemm(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(s.m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    gemm_row(ta, tb, s, a, b, c, accumulate, static_cast<std::size_t>(i));
}

template <class T>
void im2col(const ConvGeom& g, const T* image, T* col) {
  const auto rows = static_cast<std::ptrdiff_t>(g.col_rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) im2col_row(g, image, col, static_cast<std::size_t>(r));
}

template <class T>
void col2im(const ConvGeom& g, const T* col, T* image) {
  const auto channels = static_cast<std::ptrdiff_t>(g.channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < channels; ++ch)
    col2im_channel(g, col, image, static_cast<std::size_t>(ch));
}

}  // namespace omp

template <class T>
void gemm(Trans ta, Trans tb, GemmShape s, const T* a, const T* b, T* c, bool accumulate) {
  if (deterministic() || s.m * s.n * s.k < kParallelWork || s.m < 2)
    serial::gemm(ta, tb, s, a, b, c, accumulate);
  else
    omp::gemm(ta, tb, s, a, b, c, accumulate);
}

template <class T>
void im2col(const ConvGeom& g, const T* image, T* col) {
  if (deterministic() || g.col_rows() * g.col_cols() < kParallelWork)
    serial::im2col(g, image, col);
  else
    omp::im2col(g, image, col);
}

template <class T>
void col2im(const ConvGeom& g, const T* col, T* image) {
  if (deterministic() || g.col_rows() * g.col_cols() < kParallelWork)
    serial::col2im(g, col, image);
  else
    omp::col2im(g, col, image);
}

#define JQG_INSTANTIATE(T)                                                                    \
  template void serial::gemm<T>(Trans, Trans, GemmShape, const T*, const T*, T*, bool);       \
  template void omp::gemm<T>(Trans, Trans, GemmShape, const T*, const T*, T*, bool);          \
  template void gemm<T>(Trans, Trans, GemmShape, const T*, const T*, T*, bool);               \
  template void serial::im2col<T>(const ConvGeom&, const T*, T*);                             \
  template void omp::im2col<T>(const ConvGeom&, const T*, T*);                                \
  template void im2col<T>(const ConvGeom&, const T*, T*);                                     \
  template void serial::col2im<T>(const ConvGeom&, const T*, T*);                             \
  template void omp::col2im<T>(const ConvGeom&, const T*, T*);                                \
  template void col2im<T>(const ConvGeom&, const T*, T*);

JQG_INSTANTIATE(float)
JQG_INSTANTIATE(double)

#undef JQG_INSTANTIATE

}  // namespace jqg::kernels

// SPDX-License-Identifier: Apache-2.0
#include "jqg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>

#include "jqg/errors.hpp"
#include "jqg/kernels.hpp"

namespace jqg::ad {

namespace {

template <class T>
using Node = std::shared_ptr<TensorData<T>>;

template <class T>
bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
  if (active_tape<T>() == nullptr) return false;
  for (const Tensor<T>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <class T>
Tensor<T> make_output(Shape shape, bool track) {
  Tensor<T> out(std::move(shape));
  out.set_requires_grad(track);
  return out;
}

template <class T, class F>
void record(F&& fn) {
  active_tape<T>()->record(std::forward<F>(fn));
}

// Gradient buffer of an input that needs one, else nullptr.
template <class T>
T* grad_of(const Node<T>& n) {
  if (!n->requires_grad) return nullptr;
  n->ensure_grad();
  return n->grad.data();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <class T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  require(t.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                to_string(t.shape()));
}

}  // namespace

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  require(a.dim(1) == b.dim(0),
          "matmul: inner dimensions differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const bool track = tracking<T>({&a, &b});
  Tensor<T> out = make_output<T>({m, n}, track);
  kernels::gemm(kernels::Trans::No, kernels::Trans::No, {m, n, k}, a.data(), b.data(), out.data(), false);
  if (track) {
    record<T>([an = a.node(), bn = b.node(), on = out.node(), m, n, k] {
      if (on->grad.empty()) return;
      if (T* ga = grad_of(an))
        kernels::gemm(kernels::Trans::No, kernels::Trans::Yes, {m, k, n}, on->grad.data(),
                      bn->value.data(), ga, true);
      if (T* gb = grad_of(bn))
        kernels::gemm(kernels::Trans::Yes, kernels::Trans::No, {k, n, m}, an->value.data(),
                      on->grad.data(), gb, true);
    });
  }
  return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const bool track = tracking<T>({&a});
  Tensor<T> out = make_output<T>({c, r}, track);
  const T* src = a.data();
  T* dst = out.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
  if (track) {
    record<T>([an = a.node(), on = out.node(), r, c] {
      if (on->grad.empty()) return;
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += on->grad[j * r + i];
    });
  }
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shapes differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const bool track = tracking<T>({&a, &b});
  Tensor<T> out = make_output<T>(a.shape(), track);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (track) {
    record<T>([an = a.node(), bn = b.node(), on = out.node(), n] {
      if (on->grad.empty()) return;
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < n; ++i) ga[i] += on->grad[i];
      if (T* gb = grad_of(bn))
        for (std::size_t i = 0; i < n; ++i) gb[i] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shapes differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const bool track = tracking<T>({&a, &b});
  Tensor<T> out = make_output<T>(a.shape(), track);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (track) {
    record<T>([an = a.node(), bn = b.node(), on = out.node(), n] {
      if (on->grad.empty()) return;
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < n; ++i) ga[i] += on->grad[i] * bn->value[i];
      if (T* gb = grad_of(bn))
        for (std::size_t i = 0; i < n; ++i) gb[i] += on->grad[i] * an->value[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const bool track = tracking<T>({&a});
  Tensor<T> out = make_output<T>(a.shape(), track);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * factor;
  if (track) {
    record<T>([an = a.node(), on = out.node(), n, factor] {
      if (on->grad.empty()) return;
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < n; ++i) ga[i] += on->grad[i] * factor;
    });
  }
  return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  const bool track = tracking<T>({&a});
  Tensor<T> out = make_output<T>({}, track);
  T acc = 0;
  for (T v : a.values()) acc += v;
  out.data()[0] = acc;
  if (track) {
    record<T>([an = a.node(), on = out.node()] {
      if (on->grad.empty()) return;
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < an->value.size(); ++i) ga[i] += on->grad[0];
    });
  }
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <class T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b) {
  require_rank(b, 1, "add_bias");
  require(x.rank() >= 1 && x.shape().back() == b.dim(0),
          "add_bias: bias " + to_string(b.shape()) + " does not match " + to_string(x.shape()));
  const std::size_t d = b.dim(0), rows = x.numel() / d;
  const bool track = tracking<T>({&x, &b});
  Tensor<T> out = make_output<T>(x.shape(), track);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) out.data()[r * d + j] = x.data()[r * d + j] + b.data()[j];
  if (track) {
    record<T>([xn = x.node(), bn = b.node(), on = out.node(), rows, d] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < rows * d; ++i) gx[i] += on->grad[i];
      if (T* gb = grad_of(bn))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gb[j] += on->grad[r * d + j];
    });
  }
  return out;
}

template <class T>
Tensor<T> add_tiled(const Tensor<T>& x, const Tensor<T>& p) {
  require_rank(x, 2, "add_tiled");
  require_rank(p, 2, "add_tiled");
  require(x.dim(1) == p.dim(1) && p.dim(0) > 0 && x.dim(0) % p.dim(0) == 0,
          "add_tiled: " + to_string(p.shape()) + " does not tile " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), d = x.dim(1), period = p.dim(0);
  const bool track = tracking<T>({&x, &p});
  Tensor<T> out = make_output<T>(x.shape(), track);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j)
      out.data()[r * d + j] = x.data()[r * d + j] + p.data()[(r % period) * d + j];
  if (track) {
    record<T>([xn = x.node(), pn = p.node(), on = out.node(), rows, d, period] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < rows * d; ++i) gx[i] += on->grad[i];
      if (T* gp = grad_of(pn))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gp[(r % period) * d + j] += on->grad[r * d + j];
    });
  }
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>(x.shape(), track);
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  if (track) {
    record<T>([xn = x.node(), on = out.node(), n] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < n; ++i)
          if (xn->value[i] > T(0)) gx[i] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kAlpha = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kBeta = static_cast<T>(0.044715);
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>(x.shape(), track);
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x.data()[i];
    out.data()[i] = T(0.5) * v * (T(1) + std::tanh(kAlpha * (v + kBeta * v * v * v)));
  }
  if (track) {
    record<T>([xn = x.node(), on = out.node(), n] {
      if (on->grad.empty()) return;
      T* gx = grad_of(xn);
      if (!gx) return;
      for (std::size_t i = 0; i < n; ++i) {
        const T v = xn->value[i];
        const T t = std::tanh(kAlpha * (v + kBeta * v * v * v));
        const T d = T(0.5) * (T(1) + t) +
                    T(0.5) * v * (T(1) - t * t) * kAlpha * (T(1) + T(3) * kBeta * v * v);
        gx[i] += on->grad[i] * d;
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, Philox* rng) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout probability must lie in [0, 1)");
  if (mode == Mode::Eval || p == 0.0) return x;
  if (rng == nullptr) throw DomainError("dropout in training mode needs a random stream");
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>(x.shape(), track);
  const std::size_t n = x.numel();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < p ? T(0) : keep_scale;
    out.data()[i] = x.data()[i] * mask[i];
  }
  if (track) {
    record<T>([xn = x.node(), on = out.node(), mask = std::move(mask)] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += on->grad[i] * mask[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  require(x.rank() >= 1 && x.shape().back() > 0, "softmax: empty last axis");
  const std::size_t d = x.shape().back(), rows = x.numel() / d;
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>(x.shape(), track);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * d;
    T* y = out.data() + r * d;
    const T mx = *std::max_element(in, in + d);
    T total = 0;
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = std::exp(in[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < d; ++j) y[j] /= total;
  }
  if (track) {
    record<T>([xn = x.node(), on = out.node(), rows, d] {
      if (on->grad.empty()) return;
      T* gx = grad_of(xn);
      if (!gx) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = on->value.data() + r * d;
        const T* dy = on->grad.data() + r * d;
        T dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += y[j] * (dy[j] - dot);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  require(x.rank() >= 1, "layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  require(d >= 1 && gamma.numel() == d && beta.numel() == d,
          "layer_norm: affine parameters do not match " + to_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  const bool track = tracking<T>({&x, &gamma, &beta});
  Tensor<T> out = make_output<T>(x.shape(), track);
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (in[j] - mu) * is;
      xhat[r * d + j] = h;
      out.data()[r * d + j] = h * gamma.data()[j] + beta.data()[j];
    }
  }
  if (track) {
    record<T>([xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(), rows, d,
               xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      if (on->grad.empty()) return;
      T* gx = grad_of(xn);
      T* gg = grad_of(gn);
      T* gb = grad_of(bn);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* dy = on->grad.data() + r * d;
        const T* h = xhat.data() + r * d;
        if (gg)
          for (std::size_t j = 0; j < d; ++j) gg[j] += dy[j] * h[j];
        if (gb)
          for (std::size_t j = 0; j < d; ++j) gb[j] += dy[j];
        if (!gx) continue;
        T mean_dh = 0, mean_dh_h = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = dy[j] * gn->value[j];
          mean_dh += dh;
          mean_dh_h += dh * h[j];
        }
        mean_dh /= static_cast<T>(d);
        mean_dh_h /= static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = dy[j] * gn->value[j];
          gx[r * d + j] += inv_std[r] * (dh - mean_dh - h[j] * mean_dh_h);
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> cross_entropy_soft(const Tensor<T>& logits, const Tensor<T>& targets) {
  require_rank(logits, 2, "cross_entropy_soft");
  require(targets.shape() == logits.shape(), "cross_entropy_soft: target shape " +
                                                 to_string(targets.shape()) + " vs logits " +
                                                 to_string(logits.shape()));
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  require(batch > 0 && k > 0, "cross_entropy_soft: empty batch");
  for (std::size_t b = 0; b < batch; ++b) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += targets.data()[b * k + j];
    if (std::abs(s - 1.0) > 1e-6) throw DomainError("cross_entropy_soft: target row does not sum to 1");
  }
  const bool track = tracking<T>({&logits});
  Tensor<T> out = make_output<T>({}, track);
  std::vector<T> probs(batch * k);
  T loss = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* z = logits.data() + b * k;
    const T mx = *std::max_element(z, z + k);
    T total = 0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(z[j] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) {
      probs[b * k + j] = std::exp(z[j] - lse);
      loss -= targets.data()[b * k + j] * (z[j] - lse);
    }
  }
  out.data()[0] = loss / static_cast<T>(batch);
  if (track) {
    record<T>([ln = logits.node(), tn = targets.node(), on = out.node(), batch, k,
               probs = std::move(probs)] {
      if (on->grad.empty()) return;
      T* gl = grad_of(ln);
      if (!gl) return;
      const T g = on->grad[0] / static_cast<T>(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        T ysum = 0;
        for (std::size_t j = 0; j < k; ++j) ysum += tn->value[b * k + j];
        for (std::size_t j = 0; j < k; ++j)
          gl[b * k + j] += g * (probs[b * k + j] * ysum - tn->value[b * k + j]);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, std::size_t stride,
                 std::size_t padding) {
  require(input.rank() == 3 || input.rank() == 4, "conv2d: input must be [C,H,W] or [B,C,H,W]");
  require_rank(kernels, 4, "conv2d");
  require(stride >= 1, "conv2d: stride must be positive");
  const bool batched = input.rank() == 4;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const kernels::ConvGeom g{input.dim(off), input.dim(off + 1), input.dim(off + 2),
                            kernels.dim(2), kernels.dim(3), stride, padding};
  require(kernels.dim(1) == g.channels, "conv2d: kernel channels " + to_string(kernels.shape()) +
                                            " vs input " + to_string(input.shape()));
  require(g.height + 2 * padding >= g.kernel_h && g.width + 2 * padding >= g.kernel_w,
          "conv2d: kernel larger than padded input");
  require((g.height + 2 * padding - g.kernel_h) % stride == 0 &&
              (g.width + 2 * padding - g.kernel_w) % stride == 0,
          "conv2d: output size is not integral for this stride");
  const std::size_t out_ch = kernels.dim(0);
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const std::size_t in_sz = g.channels * g.height * g.width, out_sz = out_ch * oh * ow;
  const std::size_t ckk = g.col_rows(), cols = g.col_cols();

  Shape shape = batched ? Shape{batch, out_ch, oh, ow} : Shape{out_ch, oh, ow};
  const bool track = tracking<T>({&input, &kernels});
  Tensor<T> out = make_output<T>(std::move(shape), track);
  std::vector<T> col(ckk * cols);
  for (std::size_t b = 0; b < batch; ++b) {
    kernels::im2col(g, input.data() + b * in_sz, col.data());
    kernels::gemm(kernels::Trans::No, kernels::Trans::No, {out_ch, cols, ckk}, kernels.data(),
                  col.data(), out.data() + b * out_sz, false);
  }
  if (track) {
    record<T>([in = input.node(), kn = kernels.node(), on = out.node(), g, batch, out_ch, in_sz,
               out_sz, ckk, cols] {
      if (on->grad.empty()) return;
      T* gi = grad_of(in);
      T* gk = grad_of(kn);
      std::vector<T> col(ckk * cols);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* dout = on->grad.data() + b * out_sz;
        if (gk) {
          kernels::im2col(g, in->value.data() + b * in_sz, col.data());
          kernels::gemm(kernels::Trans::No, kernels::Trans::Yes, {out_ch, ckk, cols}, dout,
                        col.data(), gk, true);
        }
        if (gi) {
          kernels::gemm(kernels::Trans::Yes, kernels::Trans::No, {ckk, cols, out_ch},
                        kn->value.data(), dout, col.data(), false);
          kernels::col2im(g, col.data(), gi + b * in_sz);
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  require_rank(x, 4, "add_channel_bias");
  require(b.numel() == x.dim(1), "add_channel_bias: bias does not match channels");
  const std::size_t batch = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  const bool track = tracking<T>({&x, &b});
  Tensor<T> out = make_output<T>(x.shape(), track);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (n * ch + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out.data()[base + i] = x.data()[base + i] + b.data()[c];
    }
  if (track) {
    record<T>([xn = x.node(), bn = b.node(), on = out.node(), batch, ch, plane] {
      if (on->grad.empty()) return;
      T* gx = grad_of(xn);
      T* gb = grad_of(bn);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < ch; ++c) {
          const std::size_t base = (n * ch + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (gx) gx[base + i] += on->grad[base + i];
            if (gb) gb[c] += on->grad[base + i];
          }
        }
    });
  }
  return out;
}

template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t batch = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  require(plane > 0, "global_avg_pool: empty spatial extent");
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>({batch, ch}, track);
  for (std::size_t i = 0; i < batch * ch; ++i) {
    T acc = 0;
    for (std::size_t p = 0; p < plane; ++p) acc += x.data()[i * plane + p];
    out.data()[i] = acc / static_cast<T>(plane);
  }
  if (track) {
    record<T>([xn = x.node(), on = out.node(), batch, ch, plane] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < batch * ch; ++i) {
          const T g = on->grad[i] / static_cast<T>(plane);
          for (std::size_t p = 0; p < plane; ++p) gx[i * plane + p] += g;
        }
    });
  }
  return out;
}

template <class T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require_rank(x, 4, "avg_pool2");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2: odd spatial size " + to_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>({x.dim(0), x.dim(1), oh, ow}, track);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = x.data() + p * h * w;
    T* o = out.data() + p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t c = 0; c < ow; ++c) {
        const T* q = in + 2 * y * w + 2 * c;
        o[y * ow + c] = T(0.25) * (q[0] + q[1] + q[w] + q[w + 1]);
      }
  }
  if (track) {
    record<T>([xn = x.node(), on = out.node(), planes, w, oh, ow] {
      if (on->grad.empty()) return;
      T* gx = grad_of(xn);
      if (!gx) return;
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t c = 0; c < ow; ++c) {
            const T g = T(0.25) * on->grad[(p * oh + y) * ow + c];
            T* q = gx + p * 4 * oh * ow + 2 * y * w + 2 * c;
            q[0] += g;
            q[1] += g;
            q[w] += g;
            q[w + 1] += g;
          }
    });
  }
  return out;
}

template <class T>
Tensor<T> patchify(const Tensor<T>& images, std::size_t patch) {
  require_rank(images, 4, "patchify");
  const std::size_t batch = images.dim(0), ch = images.dim(1), h = images.dim(2), w = images.dim(3);
  require(patch > 0 && h % patch == 0 && w % patch == 0,
          "patchify: image " + to_string(images.shape()) + " is not divisible into " +
              std::to_string(patch) + "-pixel patches");
  const std::size_t gh = h / patch, gw = w / patch, n = gh * gw, dim = ch * patch * patch;
  const bool track = tracking<T>({&images});
  Tensor<T> out = make_output<T>({batch * n, dim}, track);
  // index map: out element -> image element
  std::vector<std::size_t> src(batch * n * dim);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t py = 0; py < gh; ++py)
      for (std::size_t px = 0; px < gw; ++px) {
        const std::size_t row = b * n + py * gw + px;
        std::size_t j = 0;
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t y = 0; y < patch; ++y)
            for (std::size_t x = 0; x < patch; ++x, ++j)
              src[row * dim + j] = ((b * ch + c) * h + py * patch + y) * w + px * patch + x;
      }
  for (std::size_t i = 0; i < src.size(); ++i) out.data()[i] = images.data()[src[i]];
  if (track) {
    record<T>([in = images.node(), on = out.node(), src = std::move(src)] {
      if (on->grad.empty()) return;
      if (T* gi = grad_of(in))
        for (std::size_t i = 0; i < src.size(); ++i) gi[src[i]] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_rows");
  require(begin <= end && end <= x.dim(0), "slice_rows: range out of bounds");
  const std::size_t d = x.dim(1);
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>({end - begin, d}, track);
  std::copy(x.data() + begin * d, x.data() + end * d, out.data());
  if (track) {
    record<T>([xn = x.node(), on = out.node(), begin, d] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) gx[begin * d + i] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  require(begin <= end && end <= x.dim(1), "slice_cols: range out of bounds");
  const std::size_t rows = x.dim(0), d = x.dim(1), w = end - begin;
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>({rows, w}, track);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(x.data() + r * d + begin, x.data() + r * d + end, out.data() + r * w);
  if (track) {
    record<T>([xn = x.node(), on = out.node(), rows, d, w, begin] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < w; ++j) gx[r * d + begin + j] += on->grad[r * w + j];
    });
  }
  return out;
}

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t d = parts.front().dim(1);
  std::size_t rows = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    require(p.dim(1) == d, "concat_rows: column counts differ");
    rows += p.dim(0);
    track = track || tracking<T>({&p});
  }
  Tensor<T> out = make_output<T>({rows, d}, track);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + offset);
    offset += p.numel();
  }
  if (track) {
    std::vector<Node<T>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    record<T>([nodes = std::move(nodes), on = out.node()] {
      if (on->grad.empty()) return;
      std::size_t offset = 0;
      for (const auto& n : nodes) {
        if (T* g = grad_of(n))
          for (std::size_t i = 0; i < n->value.size(); ++i) g[i] += on->grad[offset + i];
        offset += n->value.size();
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  const std::size_t rows = parts.front().dim(0);
  std::size_t d = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    require(p.dim(0) == rows, "concat_cols: row counts differ");
    d += p.dim(1);
    track = track || tracking<T>({&p});
  }
  Tensor<T> out = make_output<T>({rows, d}, track);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(p.data() + r * w, p.data() + (r + 1) * w, out.data() + r * d + col);
    col += w;
  }
  if (track) {
    std::vector<Node<T>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    record<T>([nodes = std::move(nodes), on = out.node(), rows, d] {
      if (on->grad.empty()) return;
      std::size_t col = 0;
      for (const auto& n : nodes) {
        const std::size_t w = n->shape[1];
        if (T* g = grad_of(n))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) g[r * w + j] += on->grad[r * d + col + j];
        col += w;
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t d = x.dim(1);
  for (std::size_t r : rows) require(r < x.dim(0), "gather_rows: row index out of range");
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>({rows.size(), d}, track);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(x.data() + rows[i] * d, x.data() + (rows[i] + 1) * d, out.data() + i * d);
  if (track) {
    record<T>([xn = x.node(), on = out.node(), rows, d] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) gx[rows[i] * d + j] += on->grad[i * d + j];
    });
  }
  return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(numel(shape) == x.numel(),
          "reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
  const bool track = tracking<T>({&x});
  Tensor<T> out = make_output<T>(std::move(shape), track);
  std::copy(x.data(), x.data() + x.numel(), out.data());
  if (track) {
    record<T>([xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) gx[i] += on->grad[i];
    });
  }
  return out;
}

#define JQG_INSTANTIATE(T)                                                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> transpose(const Tensor<T>&);                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add_tiled(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                   \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Philox*);                         \
  template Tensor<T> softmax(const Tensor<T>&);                                                \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> cross_entropy_soft(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);     \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                        \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                              \
  template Tensor<T> patchify(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                   \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                   \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                               \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                               \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::size_t>&);           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);

JQG_INSTANTIATE(float)
JQG_INSTANTIATE(double)

#undef JQG_INSTANTIATE

}  // namespace jqg::ad

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle to a value buffer and a lazily allocated
// gradient buffer. While a Tape is active on the current thread, every op
// whose inputs require gradients appends a backward closure to it; Tape::
// backward replays those closures in reverse order. Gradients accumulate, so
// parameters must be zeroed between optimizer steps.
//
// The scalar type is a template parameter: float for training, double for
// finite-difference verification.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace jqg::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <class T>
struct TensorData {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t i) const { return data_->shape.at(i); }
  std::size_t numel() const { return data_->value.size(); }

  std::span<T> values() { return data_->value; }
  std::span<const T> values() const { return data_->value; }
  T* data() { return data_->value.data(); }
  const T* data() const { return data_->value.data(); }

  bool has_grad() const { return !data_->grad.empty(); }
  // Allocates a zero gradient on first use.
  std::span<T> grad() {
    data_->ensure_grad();
    return data_->grad;
  }
  void zero_grad() { data_->grad.clear(); }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }

  T item() const;

  const std::shared_ptr<TensorData<T>>& node() const { return data_; }
  bool same(const Tensor& other) const { return data_ == other.data_; }

  // Deep copy of values, detached from any tape.
  Tensor clone() const;

 private:
  std::shared_ptr<TensorData<T>> data_;
};

template <class T>
class Tape {
 public:
  void record(std::function<void()> backward) { records_.push_back(std::move(backward)); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the records in reverse. Throws
  // ShapeError for non-scalar losses.
  void backward(Tensor<T>& loss);

 private:
  std::vector<std::function<void()>> records_;
};

// The tape recording on this thread, or nullptr.
template <class T>
Tape<T>* active_tape();

// Activates `tape` on the current thread for the lifetime of the scope.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Suspends recording (e.g. evaluation passes) for the lifetime of the scope.
template <class T>
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <class T>
void backward(Tape<T>& tape, Tensor<T>& loss) {
  tape.backward(loss);
}

}  // namespace jqg::ad

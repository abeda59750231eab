// SPDX-License-Identifier: Apache-2.0
#include "jqg/tensor.hpp"

#include <functional>
#include <numeric>

#include "jqg/errors.hpp"

namespace jqg::ad {

namespace {

template <class T>
Tape<T>*& current_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <class T>
Tensor<T>::Tensor(Shape shape, bool requires_grad)
    : data_(std::make_shared<TensorData<T>>()) {
  data_->value.assign(ad::numel(shape), T(0));
  data_->shape = std::move(shape);
  data_->requires_grad = requires_grad;
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : data_(std::make_shared<TensorData<T>>()) {
  if (values.size() != ad::numel(shape))
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + to_string(shape));
  data_->shape = std::move(shape);
  data_->value = std::move(values);
  data_->requires_grad = requires_grad;
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + to_string(shape()));
  return data_->value[0];
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(data_->shape, data_->value, false);
}

template <class T>
void Tape<T>::backward(Tensor<T>& loss) {
  if (loss.numel() != 1) throw ShapeError("backward needs a scalar loss, got " + to_string(loss.shape()));
  loss.grad()[0] += T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

template <class T>
Tape<T>* active_tape() {
  return current_tape<T>();
}

template <class T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(current_tape<T>()) {
  current_tape<T>() = &tape;
}

template <class T>
TapeScope<T>::~TapeScope() {
  current_tape<T>() = previous_;
}

template <class T>
NoGradScope<T>::NoGradScope() : previous_(current_tape<T>()) {
  current_tape<T>() = nullptr;
}

template <class T>
NoGradScope<T>::~NoGradScope() {
  current_tape<T>() = previous_;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;
template Tape<float>* active_tape<float>();
template Tape<double>* active_tape<double>();

}  // namespace jqg::ad

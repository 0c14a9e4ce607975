/*
 * Copyright 2026 The ConvMixer-KWS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kws/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace kws {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  impl_->values.assign(numel(shape), T(0));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values,
                            bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (values.size() != numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " +
                                shape_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  static const Shape kEmpty;
  return impl_ ? impl_->shape : kEmpty;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) throw std::out_of_range("tensor: axis out of range");
  return impl_->shape[axis];
}

template <typename T>
std::size_t BasicTensor<T>::size() const {
  return impl_ ? impl_->values.size() : 0;
}

template <typename T>
std::span<T> BasicTensor<T>::data() {
  return impl_ ? std::span<T>(impl_->values) : std::span<T>();
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  return impl_ ? std::span<const T>(impl_->values) : std::span<const T>();
}

template <typename T>
T BasicTensor<T>::item() const {
  if (size() != 1) throw std::logic_error("tensor: item() on non-scalar");
  return impl_->values[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename T>
std::span<T> BasicTensor<T>::grad() const {
  if (!impl_) return {};
  if (impl_->grad.size() != impl_->values.size()) {
    impl_->grad.assign(impl_->values.size(), T(0));
  }
  return impl_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (impl_ && !impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  if (!impl_) return {};
  BasicTensor out(impl_->shape, impl_->values, impl_->requires_grad);
  return out;
}

template <typename T>
bool BasicTape<T>::should_record(
    std::initializer_list<const BasicTensor<T>*> inputs) const {
  if (!enabled_) return false;
  for (const auto* t : inputs) {
    if (t && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void BasicTape<T>::record(std::function<void()> backward_fn) {
  nodes_.push_back(std::move(backward_fn));
}

template <typename T>
void BasicTape<T>::backward(const BasicTensor<T>& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(loss.shape()));
  }
  loss.grad()[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace kws

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

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kws {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor handle. Copies share storage; use clone() for a
/// deep copy. The gradient buffer is allocated lazily on first access.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<T> values, bool requires_grad = false);
  // Keeps Tensor({1}, {2}) from binding the literal to requires_grad.
  BasicTensor(Shape shape, std::initializer_list<T> values, bool requires_grad = false)
      : BasicTensor(std::move(shape), std::vector<T>(values), requires_grad) {}

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<T> grad() const;  // allocates zeros on demand
  void zero_grad();

  BasicTensor clone() const;

  /// Identity of the underlying storage (two handles alias iff equal).
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Records backward closures of primitive applications in execution order.
/// A disabled tape records nothing (inference mode).
template <typename T>
class BasicTape {
 public:
  explicit BasicTape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// True when an op over `inputs` must be recorded.
  bool should_record(std::initializer_list<const BasicTensor<T>*> inputs) const;

  void record(std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and runs recorded closures in exact reverse
  /// order. Throws when `loss` is not a scalar.
  void backward(const BasicTensor<T>& loss);

  void clear() { nodes_.clear(); }

 private:
  bool enabled_;
  std::vector<std::function<void()>> nodes_;
};

using Tensor = BasicTensor<float>;
using Tape = BasicTape<float>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace kws

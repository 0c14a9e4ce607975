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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "kws/tensor.hpp"

namespace kws {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, 1e-8)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares reverse-mode gradients of the scalar `loss_fn` with respect to
/// every entry of `inputs` against central finite differences.
template <typename T>
GradCheckReport grad_check(
    const std::function<BasicTensor<T>(BasicTape<T>&)>& loss_fn,
    std::vector<BasicTensor<T>> inputs, double step, double tol) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  {
    BasicTape<T> tape;
    BasicTensor<T> loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<T>> analytic;
  for (auto& in : inputs) {
    auto g = in.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  auto evaluate = [&]() {
    BasicTape<T> tape(false);
    return static_cast<double>(loss_fn(tape).item());
  };

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      values[i] = static_cast<T>(saved + step);
      const double up = evaluate();
      values[i] = static_cast<T>(saved - step);
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[k][i], numeric);
      ++report.checked;
      if (err > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = err;
        report.worst_input = k;
        report.worst_index = i;
        report.analytic = analytic[k][i];
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

/// Single-input form: `f` maps x to a scalar.
template <typename T>
GradCheckReport grad_check(
    const std::function<BasicTensor<T>(BasicTape<T>&, const BasicTensor<T>&)>& f,
    BasicTensor<T> x, double step, double tol) {
  return grad_check<T>(
      [&](BasicTape<T>& tape) { return f(tape, x); }, {x}, step, tol);
}

}  // namespace kws

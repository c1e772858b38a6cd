// Copyright 2026 The nfcodec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NFC_TESTS_TEST_UTIL_H_
#define NFC_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nfc/flow.h"
#include "nfc/tensor.h"

namespace nfc::testing {

template <typename T>
Tensor<T> RandomTensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0,
                       bool requires_grad = false) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<T> v(static_cast<size_t>(NumElements(shape)));
  for (auto& e : v) e = static_cast<T>(normal(rng));
  return Tensor<T>(shape, std::move(v), requires_grad);
}

struct GradCheckResult {
  double max_rel_error = 0;
  double max_abs_error = 0;
  int checked = 0;
};

// Compares d loss / d leaf from Backward() against central differences.
// Relative error is |a - n| / max(|a| + |n|, floor). At most `per_leaf`
// evenly spaced elements of each leaf are probed.
inline GradCheckResult CheckGradients(const std::function<Tensor<double>()>& loss,
                                      std::vector<Tensor<double>> leaves, double h = 1e-6,
                                      double floor = 1e-6, int per_leaf = 1 << 30) {
  for (auto& l : leaves) l.ZeroGrad();
  loss().Backward();
  GradCheckResult r;
  for (auto& leaf : leaves) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    const int64_t n = leaf.numel();
    const int64_t stride = std::max<int64_t>(1, n / per_leaf);
    for (int64_t i = 0; i < n; i += stride) {
      auto data = leaf.mutable_data();
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss().item();
      data[i] = saved - h;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double abs_err = std::abs(numeric - analytic[i]);
      const double rel = abs_err / std::max(std::abs(numeric) + std::abs(analytic[i]), floor);
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      r.max_rel_error = std::max(r.max_rel_error, rel);
      ++r.checked;
    }
  }
  return r;
}

// Fresh model whose zero-initialized output layers are replaced by small
// random weights, so every coupling and conditional is non-trivial.
template <typename T>
FlowModel<T> RandomizedModel(const FlowConfig& config, uint64_t seed, double out_scale = 0.05) {
  FlowModel<T> m = FlowModel<T>::Create(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, out_scale);
  for (auto& e : m.params().entries()) {
    const bool out_layer = e.name.ends_with(".out.w") || e.name.ends_with(".out.b");
    if (!out_layer) continue;
    for (auto& v : e.value.mutable_data()) v = static_cast<T>(normal(rng));
  }
  return m;
}

}  // namespace nfc::testing

#endif  // NFC_TESTS_TEST_UTIL_H_

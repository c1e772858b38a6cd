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

#include "nfc/quantizer.h"

#include <cmath>

#include "nfc/error.h"
#include "nfc/ops.h"

namespace nfc {
namespace {

thread_local RoundCache* active_cache = nullptr;

// Rounded values of x; through the active cache when there is one.
template <typename T>
std::vector<T> RoundAll(std::span<const T> x) {
  std::vector<T> out(x.size());
  if (active_cache == nullptr) {
    for (size_t i = 0; i < x.size(); ++i) out[i] = std::nearbyint(x[i]);
    return out;
  }
  std::vector<double> xd(x.begin(), x.end());
  const std::vector<double> off = active_cache->Offsets(xd);
  for (size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(xd[i] + off[i]);
  return out;
}

}  // namespace

std::vector<double> RoundCache::Offsets(std::span<const double> x) {
  if (mode_ == Mode::kRecord) {
    std::vector<double> off(x.size());
    for (size_t i = 0; i < x.size(); ++i) off[i] = std::nearbyint(x[i]) - x[i];
    offsets_.push_back(off);
    return off;
  }
  if (cursor_ >= offsets_.size() || offsets_[cursor_].size() != x.size()) {
    throw UsageError("round cache replay does not match the recorded pass");
  }
  return offsets_[cursor_++];
}

RoundCacheScope::RoundCacheScope(RoundCache* cache) : previous_(active_cache) {
  active_cache = cache;
}

RoundCacheScope::~RoundCacheScope() { active_cache = previous_; }

double SampleNoise(double step, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.5 * step, 0.5 * step);
  return dist(rng);
}

template <typename T>
Tensor<T> SteRound(const Tensor<T>& x) {
  return MakeResult<T>(x.shape(), RoundAll<T>(x.data()), {x}, [](autograd::Node<T>& n) {
    auto g = n.InputGrad(0);
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> UniversalQuantize(const Tensor<T>& z, double step, double u) {
  if (!(step > 0)) throw UsageError("quantization step must be > 0");
  const Tensor<T> scaled = Scale(AddScalar(z, static_cast<T>(u)), static_cast<T>(1.0 / step));
  return AddScalar(Scale(SteRound(scaled), static_cast<T>(step)), static_cast<T>(-u));
}

template <typename T>
Tensor<T> RoundToGrid(const Tensor<T>& z, std::span<const double> steps) {
  const int64_t channels = z.rank() > 1 ? z.dim(1) : 1;
  if (steps.size() != 1 && static_cast<int64_t>(steps.size()) != channels) {
    throw UsageError("round_to_grid: " + std::to_string(steps.size()) + " steps for " +
                     std::to_string(channels) + " channels");
  }
  int64_t inner = 1;
  for (size_t i = 2; i < z.rank(); ++i) inner *= z.dim(i);
  const auto zv = z.data();
  std::vector<T> out(zv.size());
  for (size_t i = 0; i < zv.size(); ++i) {
    const double s = steps.size() == 1 ? steps[0] : steps[(static_cast<int64_t>(i) / inner) % channels];
    if (!(s > 0)) throw UsageError("quantization step must be > 0");
    out[i] = static_cast<T>(s * std::nearbyint(static_cast<double>(zv[i]) / s));
  }
  return Tensor<T>(z.shape(), std::move(out));
}

template <typename T>
Tensor<T> SteRoundToGrid(const Tensor<T>& z, const Tensor<T>& step) {
  const int64_t channels = z.rank() > 1 ? z.dim(1) : 1;
  const int64_t ns = step.numel();
  if (ns != 1 && ns != channels) {
    throw UsageError("ste_round_to_grid: step " + ShapeString(step.shape()) + " for input " +
                     ShapeString(z.shape()));
  }
  int64_t inner = 1;
  for (size_t i = 2; i < z.rank(); ++i) inner *= z.dim(i);
  auto channel_of = [=](size_t i) -> size_t {
    return ns == 1 ? 0 : static_cast<size_t>((static_cast<int64_t>(i) / inner) % channels);
  };
  const auto zv = z.data();
  const auto sv = step.data();
  std::vector<T> units(zv.size());
  for (size_t i = 0; i < zv.size(); ++i) units[i] = zv[i] / sv[channel_of(i)];
  std::vector<T> rounded = RoundAll<T>(std::span<const T>(units));
  std::vector<T> out(zv.size());
  // Straight-through w.r.t. the step: d/ds [s r(z/s)] = r - z/s.
  auto residual = std::make_shared<std::vector<T>>(zv.size());
  for (size_t i = 0; i < zv.size(); ++i) {
    out[i] = rounded[i] * sv[channel_of(i)];
    (*residual)[i] = rounded[i] - units[i];
  }
  return MakeResult<T>(z.shape(), std::move(out), {z, step},
                       [residual, channel_of](autograd::Node<T>& n) {
    auto gz = n.InputGrad(0);
    for (size_t i = 0; i < gz.size(); ++i) gz[i] += n.grad[i];
    auto gs = n.InputGrad(1);
    if (gs.empty()) return;
    for (size_t i = 0; i < n.grad.size(); ++i) gs[channel_of(i)] += n.grad[i] * (*residual)[i];
  });
}

#define NFC_INSTANTIATE_QUANTIZER(T)                                                   \
  template Tensor<T> SteRound(const Tensor<T>&);                                     \
  template Tensor<T> UniversalQuantize(const Tensor<T>&, double, double);            \
  template Tensor<T> RoundToGrid(const Tensor<T>&, std::span<const double>);          \
  template Tensor<T> SteRoundToGrid(const Tensor<T>&, const Tensor<T>&);

NFC_INSTANTIATE_QUANTIZER(float)
NFC_INSTANTIATE_QUANTIZER(double)

#undef NFC_INSTANTIATE_QUANTIZER

}  // namespace nfc

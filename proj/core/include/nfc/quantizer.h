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

#ifndef NFC_QUANTIZER_H_
#define NFC_QUANTIZER_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nfc/tensor.h"

namespace nfc {

// Shared dither u ~ U(-step/2, step/2), one draw per latent tensor.
double SampleNoise(double step, std::mt19937_64& rng);

// Straight-through rounding: nearest integer forward, identity backward.
template <typename T>
Tensor<T> SteRound(const Tensor<T>& x);

// step * round((z + u) / step) - u with a straight-through gradient.
template <typename T>
Tensor<T> UniversalQuantize(const Tensor<T>& z, double step, double u);

// step * round(z / step), ties to even. Not differentiable.
// `steps` holds one value or one per channel (axis 1).
template <typename T>
Tensor<T> RoundToGrid(const Tensor<T>& z, std::span<const double> steps);

// step * round(z / step) with straight-through gradients for both z and
// the step tensor ([1] or [C]).
template <typename T>
Tensor<T> SteRoundToGrid(const Tensor<T>& z, const Tensor<T>& step);

// Freezes the rounding offsets of every straight-through op so that a
// perturbed forward pass stays on the same branch as the recorded one.
// Used for finite-difference gradient checks.
class RoundCache {
 public:
  enum class Mode { kRecord, kReplay };

  void Record() {
    mode_ = Mode::kRecord;
    offsets_.clear();
    cursor_ = 0;
  }
  void Replay() {
    mode_ = Mode::kReplay;
    cursor_ = 0;
  }
  Mode mode() const { return mode_; }
  size_t size() const { return offsets_.size(); }

  // Returns round(x) - x per element, recorded or replayed.
  std::vector<double> Offsets(std::span<const double> x);

 private:
  Mode mode_ = Mode::kRecord;
  std::vector<std::vector<double>> offsets_;
  size_t cursor_ = 0;
};

// Makes `cache` active on this thread for the lifetime of the scope.
class RoundCacheScope {
 public:
  explicit RoundCacheScope(RoundCache* cache);
  ~RoundCacheScope();
  RoundCacheScope(const RoundCacheScope&) = delete;
  RoundCacheScope& operator=(const RoundCacheScope&) = delete;

 private:
  RoundCache* previous_;
};

}  // namespace nfc

#endif  // NFC_QUANTIZER_H_

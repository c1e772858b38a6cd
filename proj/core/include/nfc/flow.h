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

// Multi-level additive-coupling flow.
//
// Level l (0 = finest) squeezes its input 2x2 -> 4x channels, applies K
// steps of (fixed channel permutation, additive coupling), then factors out
// half the channels as an emitted latent. The deepest level emits all of its
// channels. Latents are indexed from the deepest: latent 0 comes from level
// L-1, latent L-1 from level 0. Latent k >= 1 is modeled conditionally on
// the features that continue past its factor-out, features[k].
//
// Every layer is volume preserving, so no log-determinant terms appear.

#ifndef NFC_FLOW_H_
#define NFC_FLOW_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfc/param_store.h"
#include "nfc/tensor.h"

namespace nfc {

struct FlowConfig {
  int levels = 3;
  int steps = 2;   // coupling steps per level (K)
  int blocks = 1;  // residual blocks in t() and phi() (B)
  int hidden = 16; // hidden channels in t() and phi() (C)
  int in_channels = 3;
  int prior_width = 3;
  uint64_t seed = 1;
};

// Lower bound / upper bound of the conditional log-scale.
inline constexpr double kLogScaleMin = -7.0;
inline constexpr double kLogScaleMax = 7.0;

template <typename T>
struct FlowOutput {
  std::vector<Tensor<T>> latents;   // latents[0] is the deepest (z0)
  std::vector<Tensor<T>> features;  // features[k] conditions latents[k]; [0] unused
};

template <typename T>
struct Conditional {
  Tensor<T> mean;
  Tensor<T> scale;  // exp(clamp(s)), strictly positive
};

// Channel bookkeeping of one coupling step.
struct CouplingLayout {
  std::vector<int> permutation;  // applied before the coupling
  std::vector<int> inverse_permutation;
  std::vector<int> part_a;       // conditioning half (passes through)
  std::vector<int> part_b;       // shifted half
  std::vector<int> merge;        // gathers [a | b] back into channel order
};

struct LevelLayout {
  int64_t channels = 0;  // after squeeze
  bool factor_out = false;
  std::vector<CouplingLayout> steps;
};

template <typename T>
class FlowModel {
 public:
  FlowModel() = default;

  // Fresh model: random hidden layers, zero output layers (identity
  // couplings, mean 0 / scale 1 conditionals), symmetric factorized prior.
  static FlowModel Create(const FlowConfig& config);
  // Rebuilds the layouts from config.seed around existing parameters.
  static FlowModel FromParams(const FlowConfig& config, ParamStore<T> params);

  const FlowConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const std::vector<LevelLayout>& layouts() const { return layouts_; }

  int num_latents() const { return config_.levels; }
  // Spatial extents must be divisible by this.
  int64_t granularity() const { return int64_t{1} << config_.levels; }
  std::vector<Shape> LatentShapes(const Shape& input) const;
  int64_t prior_channels() const;

  FlowOutput<T> Forward(const Tensor<T>& x) const;
  Tensor<T> Inverse(const std::vector<Tensor<T>>& latents) const;

  // Inverts one level. For the deepest level `continued` is ignored.
  Tensor<T> InverseLevel(int level, const Tensor<T>& emitted, const Tensor<T>& continued) const;

  // Features conditioning latent k, rebuilt from latents[0..k-1] only.
  Tensor<T> ReconstructFeatures(int k, const std::vector<Tensor<T>>& latents) const;
  // All conditioning features at once; result[0] is undefined.
  std::vector<Tensor<T>> ReconstructAllFeatures(const std::vector<Tensor<T>>& latents) const;

  Conditional<T> Conditioning(int k, const Tensor<T>& features) const;

  Tensor<T> CouplingForward(int level, int step, const Tensor<T>& u) const;
  Tensor<T> CouplingInverse(int level, int step, const Tensor<T>& v) const;

  template <typename U>
  FlowModel<U> Cast() const {
    return FlowModel<U>::FromParams(config_, params_.template Cast<U>());
  }

  // "NFC1" model file bytes; parameters are always stored as f64.
  std::vector<uint8_t> Serialize() const;
  static FlowModel Deserialize(std::span<const uint8_t> bytes);
  void Save(const std::string& path) const;
  static FlowModel Load(const std::string& path);

  // Content hash of the serialized model.
  uint64_t ModelId() const;

 private:
  Tensor<T> ShiftNetwork(int level, int step, const Tensor<T>& u_a) const;
  Tensor<T> ForwardLevel(int level, const Tensor<T>& x, Tensor<T>* emitted) const;

  FlowConfig config_;
  ParamStore<T> params_;
  std::vector<LevelLayout> layouts_;
};

// Residual network used as t() and phi(): input conv + ReLU, `blocks`
// residual blocks of two 3x3 convs, output conv. Parameters live under
// `prefix`.
template <typename T>
Tensor<T> ResidualNetwork(const ParamStore<T>& params, const std::string& prefix, int blocks,
                          const Tensor<T>& x);

template <typename T>
void RegisterResidualNetwork(ParamStore<T>& params, const std::string& prefix, int in_channels,
                             int hidden, int out_channels, int blocks, uint64_t seed);

std::vector<LevelLayout> BuildLayouts(const FlowConfig& config);

extern template class FlowModel<float>;
extern template class FlowModel<double>;

}  // namespace nfc

#endif  // NFC_FLOW_H_

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

// Probability models over quantized latents.
//
// Latent 0 uses a per-channel learned CDF F_c (a monotone chain of
// softplus-positive affine maps and tanh-gated nonlinearities ending in a
// sigmoid); a symbol v on a step-delta grid has mass
// F_c(v + delta/2) - F_c(v - delta/2). Latents k >= 1 use a logistic with
// (mean, scale) from the conditioning network integrated over the same bin.

#ifndef NFC_ENTROPY_MODEL_H_
#define NFC_ENTROPY_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "nfc/flow.h"
#include "nfc/param_store.h"
#include "nfc/tensor.h"

namespace nfc {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr int kPriorStages = 4;

// Quantization steps: one scalar per conditional latent and one per channel
// of latent 0.
struct QuantSpec {
  std::vector<double> conditional;  // conditional[k - 1] is the step of latent k
  std::vector<double> prior;        // per channel of latent 0

  static QuantSpec Uniform(int num_latents, int64_t prior_channels, double step);
  double Step(int k) const { return conditional.at(static_cast<size_t>(k - 1)); }
  // Throws unless every step is finite and > 0 and the counts match.
  void Validate(int num_latents, int64_t prior_channels) const;

  bool operator==(const QuantSpec&) const = default;
};

// Text form: a count line, then one value per line ordered from the finest
// latent down (z2, z1, then the z0 channels).
std::string FormatQuantSpec(const QuantSpec& q);
QuantSpec ParseQuantSpec(const std::string& text, int num_latents);

template <typename T>
void RegisterFactorizedPrior(ParamStore<T>& params, int64_t channels, int width, double init_scale);

// Logit of F_c(x) for every element of an NCHW tensor, differentiable with
// respect to x and the prior parameters.
template <typename T>
Tensor<T> PriorLogits(const ParamStore<T>& params, const Tensor<T>& x);

// -log2 of sigmoid(upper) - sigmoid(lower) per element (upper > lower),
// evaluated in the log domain. With `floor` the mass is clamped below at
// kProbabilityFloor (zero gradient there).
template <typename T>
Tensor<T> BinNllFromLogits(const Tensor<T>& upper, const Tensor<T>& lower, bool floor);

// Per-element bits of latent 0 on bins of width `step` ([1] or per channel).
template <typename T>
Tensor<T> PriorBits(const ParamStore<T>& params, const Tensor<T>& z0, const Tensor<T>& step,
                    bool floor);

// Per-element bits of a conditional latent.
template <typename T>
Tensor<T> ConditionalBits(const Tensor<T>& z, const Conditional<T>& cond, const Tensor<T>& step,
                          bool floor);

// Total bits of a quantized latent set, with conditioning features rebuilt
// from the quantized deeper latents (the decoder's view).
template <typename T>
Tensor<T> LatentRateBits(const FlowModel<T>& model, const std::vector<Tensor<T>>& latents,
                         const QuantSpec& q);

// Scalar evaluation for the coder.
class PriorEvaluator {
 public:
  explicit PriorEvaluator(const ParamStore<double>& params);
  int64_t channels() const { return channels_; }
  double Logit(int64_t channel, double x) const;
  double Cdf(int64_t channel, double x) const;
  // Floored mass of the bin centred on v.
  double BinProb(int64_t channel, double v, double step) const;

 private:
  int64_t channels_ = 0;
  int width_ = 0;
  std::vector<std::vector<double>> matrices_;  // softplus already applied
  std::vector<std::vector<double>> biases_;
  std::vector<std::vector<double>> gates_;     // tanh already applied
};

// sigmoid((v + step/2 - mean)/scale) - sigmoid((v - step/2 - mean)/scale),
// floored at kProbabilityFloor.
double LogisticBinProb(double v, double mean, double scale, double step);

// Nearest grid point to `mean` (ties to even), as an index and a value.
int64_t MeanSymbolIndex(double mean, double step);
double MeanSymbol(double mean, double step);

}  // namespace nfc

#endif  // NFC_ENTROPY_MODEL_H_

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

#ifndef NFC_TRAINER_H_
#define NFC_TRAINER_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nfc/entropy_model.h"
#include "nfc/flow.h"
#include "nfc/image.h"
#include "nfc/param_store.h"
#include "nfc/tensor.h"

namespace nfc {

struct TrainConfig {
  FlowConfig flow;
  double lambda = 500;  // see DistortionWeight
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double train_step = 1.0;         // quantization step while training
  double dequant_amplitude = 1.0;  // data noise for the likelihood warm-up
  int batch_size = 8;
  int iterations = 500;  // optimizer steps on the rate-distortion loss
  int warmup = 0;        // preceding likelihood-only steps
  int patch = 32;
  int log_every = 10;
  uint64_t seed = 1;

  void Validate() const;
};

// key=value lines; '#' starts a comment. Unknown keys are rejected.
TrainConfig ParseTrainConfig(const std::string& text);
std::string FormatTrainConfig(const TrainConfig& config);
// Applies NFC_SEED from the environment, if set.
void ApplySeedOverride(TrainConfig* config);

// Dequantized likelihood: mean bits per image of the continuous latents
// under the bin-integrated models at `step`.
template <typename T>
Tensor<T> NllLoss(const FlowModel<T>& model, const Tensor<T>& x, double step);

template <typename T>
struct RdTerms {
  Tensor<T> loss;
  Tensor<T> rate;        // bits per pixel
  Tensor<T> distortion;  // mse of the full reconstruction, pixel units
  Tensor<T> sampled_distortion;  // mse of the sampling-path reconstruction
};

// Losses weigh bits per pixel against lambda times the squared error of
// pixels scaled to [0, 1]. Returns the equivalent weight on the squared
// error in [0, 255] pixel units.
inline double DistortionWeight(double lambda) { return lambda / (kPixelPeak * kPixelPeak); }

// rate + lambda * (mse(x, x_hat) + mse(x, x_tilde)) with universal
// quantization (one dither per latent from `rng`).
template <typename T>
RdTerms<T> RdLoss(const FlowModel<T>& model, const Tensor<T>& x, double lambda, double step,
                  std::mt19937_64& rng);

// Inverse from z0 alone, every finer latent replaced by the grid point
// nearest its conditional mean. Straight-through in the rounding.
template <typename T>
Tensor<T> SamplingReconstruction(const FlowModel<T>& model, const Tensor<T>& z0,
                                 const std::vector<double>& steps);

// Infinity-norm Adam variant; state lives in the parameter store.
template <typename T>
class AdaMax {
 public:
  AdaMax(double lr, double beta1, double beta2, double epsilon)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}
  void Step(ParamStore<T>& params);
  int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  int64_t t_ = 0;
};

class Adam {
 public:
  Adam(double lr, size_t size, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size), v_(size) {}
  void Step(std::vector<double>& params, const std::vector<double>& grads);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  int64_t t_ = 0;
  std::vector<double> m_, v_;
};

struct MetricsRow {
  int step = 0;
  double nll = 0;         // bits per pixel
  double rate = 0;        // bits per pixel
  double distortion = 0;  // mse
  double psnr = 0;
  double loss = 0;
};

std::string MetricsCsvHeader();
std::string MetricsCsvRow(const MetricsRow& row);

std::vector<Image> RandomCrops(const std::vector<Image>& corpus, int count, int64_t patch,
                               std::mt19937_64& rng);

struct TrainResult {
  FlowModel<float> model;
  std::vector<MetricsRow> history;
};

TrainResult Train(const TrainConfig& config, const std::vector<Image>& corpus,
                  const std::function<void(const MetricsRow&)>& on_log = {});

struct FinetuneOptions {
  int iterations = 150;
  double learning_rate = 0.1;
  double initial_step = 1.0;
};

// Adam over log steps of the frozen model: rate + lambda * mse(x, x_hat),
// with lambda as in DistortionWeight.
QuantSpec FinetuneSteps(const FlowModel<double>& model, const std::vector<Image>& images,
                        double lambda, const FinetuneOptions& options = {});

struct RdPoint {
  double lambda = 0;
  double bpp = 0;
  double psnr = 0;
  QuantSpec steps;
};

// Mean bpp and PSNR of a full encode/decode of every image.
RdPoint MeasureRd(const FlowModel<double>& model, const std::vector<Image>& images,
                  const QuantSpec& steps);
std::vector<RdPoint> RdSweep(const FlowModel<double>& model, const std::vector<Image>& images,
                             const std::vector<double>& lambdas,
                             const FinetuneOptions& options = {});
std::string RdCsvHeader();
std::string RdCsvRow(const RdPoint& point);

}  // namespace nfc

#endif  // NFC_TRAINER_H_

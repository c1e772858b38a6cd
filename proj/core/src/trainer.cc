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

#include "nfc/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <locale>
#include <map>
#include <sstream>

#include "nfc/codec.h"
#include "nfc/error.h"
#include "nfc/ops.h"
#include "nfc/quantizer.h"

namespace nfc {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V ParseValue(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  V v{};
  std::string rest;
  if (!(in >> v) || (in >> rest)) {
    throw FormatError("config: bad value '" + text + "' for key '" + key + "'");
  }
  return v;
}

std::ostringstream CsvStream() {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(10);
  return out;
}

template <typename T>
Tensor<T> MeanSquared(const Tensor<T>& a, const Tensor<T>& b) {
  return Mean(Square(Sub(a, b)));
}

template <typename T>
int64_t PixelsOf(const Tensor<T>& x) {
  return x.dim(0) * x.dim(2) * x.dim(3);
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(lambda >= 0) || !(learning_rate > 0) || !(train_step > 0) || !(epsilon > 0) ||
      !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(dequant_amplitude >= 0)) {
    throw UsageError("config: lambda >= 0, learning_rate > 0, train_step > 0 required");
  }
  if (batch_size < 1 || iterations < 0 || warmup < 0 || log_every < 1) {
    throw UsageError("config: batch_size and log_every must be positive");
  }
  if (patch < 1 || patch % (1 << flow.levels) != 0) {
    throw UsageError("config: patch must be a positive multiple of " +
                     std::to_string(1 << flow.levels));
  }
  BuildLayouts(flow);  // validates the architecture
}

TrainConfig ParseTrainConfig(const std::string& text) {
  TrainConfig c;
  std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"levels", [&](const std::string& v) { c.flow.levels = ParseValue<int>("levels", v); }},
      {"coupling_steps",
       [&](const std::string& v) { c.flow.steps = ParseValue<int>("coupling_steps", v); }},
      {"blocks", [&](const std::string& v) { c.flow.blocks = ParseValue<int>("blocks", v); }},
      {"hidden", [&](const std::string& v) { c.flow.hidden = ParseValue<int>("hidden", v); }},
      {"in_channels",
       [&](const std::string& v) { c.flow.in_channels = ParseValue<int>("in_channels", v); }},
      {"prior_width",
       [&](const std::string& v) { c.flow.prior_width = ParseValue<int>("prior_width", v); }},
      {"seed", [&](const std::string& v) { c.seed = c.flow.seed = ParseValue<uint64_t>("seed", v); }},
      {"lambda", [&](const std::string& v) { c.lambda = ParseValue<double>("lambda", v); }},
      {"learning_rate",
       [&](const std::string& v) { c.learning_rate = ParseValue<double>("learning_rate", v); }},
      {"beta1", [&](const std::string& v) { c.beta1 = ParseValue<double>("beta1", v); }},
      {"beta2", [&](const std::string& v) { c.beta2 = ParseValue<double>("beta2", v); }},
      {"epsilon", [&](const std::string& v) { c.epsilon = ParseValue<double>("epsilon", v); }},
      {"train_step",
       [&](const std::string& v) { c.train_step = ParseValue<double>("train_step", v); }},
      {"dequant_amplitude",
       [&](const std::string& v) { c.dequant_amplitude = ParseValue<double>("dequant_amplitude", v); }},
      {"batch_size", [&](const std::string& v) { c.batch_size = ParseValue<int>("batch_size", v); }},
      {"iterations", [&](const std::string& v) { c.iterations = ParseValue<int>("iterations", v); }},
      {"warmup", [&](const std::string& v) { c.warmup = ParseValue<int>("warmup", v); }},
      {"patch", [&](const std::string& v) { c.patch = ParseValue<int>("patch", v); }},
      {"log_every", [&](const std::string& v) { c.log_every = ParseValue<int>("log_every", v); }},
  };
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = Trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(number) + ": expected key=value");
    }
    const std::string key = Trim(line.substr(0, eq));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw FormatError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    it->second(Trim(line.substr(eq + 1)));
  }
  c.Validate();
  return c;
}

std::string FormatTrainConfig(const TrainConfig& c) {
  std::ostringstream out = CsvStream();
  out << std::setprecision(17);
  out << "levels=" << c.flow.levels << "\ncoupling_steps=" << c.flow.steps
      << "\nblocks=" << c.flow.blocks << "\nhidden=" << c.flow.hidden
      << "\nin_channels=" << c.flow.in_channels << "\nprior_width=" << c.flow.prior_width
      << "\nseed=" << c.seed << "\nlambda=" << c.lambda << "\nlearning_rate=" << c.learning_rate
      << "\nbeta1=" << c.beta1 << "\nbeta2=" << c.beta2 << "\nepsilon=" << c.epsilon
      << "\ntrain_step=" << c.train_step << "\ndequant_amplitude=" << c.dequant_amplitude
      << "\nbatch_size=" << c.batch_size << "\niterations=" << c.iterations
      << "\nwarmup=" << c.warmup << "\npatch=" << c.patch << "\nlog_every=" << c.log_every
      << "\n";
  return out.str();
}

void ApplySeedOverride(TrainConfig* config) {
  const char* env = std::getenv("NFC_SEED");
  if (env == nullptr || *env == '\0') return;
  config->seed = config->flow.seed = ParseValue<uint64_t>("NFC_SEED", env);
}

template <typename T>
Tensor<T> NllLoss(const FlowModel<T>& model, const Tensor<T>& x, double step) {
  const FlowOutput<T> fw = model.Forward(x);
  const Tensor<T> s = Tensor<T>::Constant(static_cast<T>(step));
  Tensor<T> bits = Sum(PriorBits(model.params(), fw.latents[0], s, false));
  for (int k = 1; k < model.num_latents(); ++k) {
    const Conditional<T> cond = model.Conditioning(k, fw.features[k]);
    bits = Add(bits, Sum(ConditionalBits(fw.latents[k], cond, s, false)));
  }
  return Scale(bits, static_cast<T>(1.0 / static_cast<double>(x.dim(0))));
}

template <typename T>
Tensor<T> SamplingReconstruction(const FlowModel<T>& model, const Tensor<T>& z0,
                                 const std::vector<double>& steps) {
  const int levels = model.num_latents();
  if (static_cast<int>(steps.size()) != levels - 1) {
    throw UsageError("sampling path: expected " + std::to_string(levels - 1) + " steps");
  }
  Tensor<T> cur = model.InverseLevel(levels - 1, z0, Tensor<T>());
  for (int k = 1; k < levels; ++k) {
    const Conditional<T> cond = model.Conditioning(k, cur);
    const Tensor<T> zk =
        SteRoundToGrid(cond.mean, Tensor<T>::Constant(static_cast<T>(steps[k - 1])));
    cur = model.InverseLevel(levels - 1 - k, zk, cur);
  }
  return cur;
}

template <typename T>
RdTerms<T> RdLoss(const FlowModel<T>& model, const Tensor<T>& x, double lambda, double step,
                  std::mt19937_64& rng) {
  const int levels = model.num_latents();
  const FlowOutput<T> fw = model.Forward(x);
  std::vector<Tensor<T>> zhat;
  for (int k = 0; k < levels; ++k) {
    zhat.push_back(UniversalQuantize(fw.latents[k], step, SampleNoise(step, rng)));
  }
  const Tensor<T> s = Tensor<T>::Constant(static_cast<T>(step));
  Tensor<T> bits = Sum(PriorBits(model.params(), zhat[0], s, false));
  for (int k = 1; k < levels; ++k) {
    const Conditional<T> cond = model.Conditioning(k, fw.features[k]);
    bits = Add(bits, Sum(ConditionalBits(zhat[k], cond, s, false)));
  }
  RdTerms<T> t;
  t.rate = Scale(bits, static_cast<T>(1.0 / static_cast<double>(PixelsOf(x))));
  t.distortion = MeanSquared(model.Inverse(zhat), x);
  const std::vector<double> steps(static_cast<size_t>(levels - 1), step);
  t.sampled_distortion = MeanSquared(SamplingReconstruction(model, zhat[0], steps), x);
  t.loss = Add(t.rate, Scale(Add(t.distortion, t.sampled_distortion),
                              static_cast<T>(DistortionWeight(lambda))));
  return t;
}

template <typename T>
void AdaMax<T>::Step(ParamStore<T>& params) {
  ++t_;
  const double rate = lr_ / (1.0 - std::pow(beta1_, static_cast<double>(t_)));
  for (auto& e : params.entries()) {
    if (!e.value.requires_grad()) continue;
    const auto g = e.value.grad();
    auto p = e.value.mutable_data();
    e.first_moment.resize(p.size(), T(0));
    e.second_moment.resize(p.size(), T(0));
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double m = beta1_ * e.first_moment[i] + (1.0 - beta1_) * gi;
      const double u = std::max(beta2_ * e.second_moment[i], std::abs(gi));
      e.first_moment[i] = static_cast<T>(m);
      e.second_moment[i] = static_cast<T>(u);
      p[i] = static_cast<T>(p[i] - rate * m / (u + epsilon_));
    }
  }
}

void Adam::Step(std::vector<double>& params, const std::vector<double>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
  }
}

std::string MetricsCsvHeader() { return "step,nll,rate,distortion,psnr\n"; }

std::string MetricsCsvRow(const MetricsRow& r) {
  std::ostringstream out = CsvStream();
  out << r.step << "," << r.nll << "," << r.rate << "," << r.distortion << "," << r.psnr << "\n";
  return out.str();
}

std::vector<Image> RandomCrops(const std::vector<Image>& corpus, int count, int64_t patch,
                               std::mt19937_64& rng) {
  if (corpus.empty()) throw UsageError("empty training corpus");
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) {
    const Image& img = corpus[rng() % corpus.size()];
    if (img.height < patch || img.width < patch) {
      throw UsageError("corpus image smaller than the patch size " + std::to_string(patch));
    }
    const int64_t y = static_cast<int64_t>(rng() % static_cast<uint64_t>(img.height - patch + 1));
    const int64_t x = static_cast<int64_t>(rng() % static_cast<uint64_t>(img.width - patch + 1));
    out.push_back(Crop(img, y, x, patch, patch));
  }
  return out;
}

TrainResult Train(const TrainConfig& config, const std::vector<Image>& corpus,
                  const std::function<void(const MetricsRow&)>& on_log) {
  config.Validate();
  TrainResult result;
  FlowConfig flow = config.flow;
  flow.seed = config.seed;
  result.model = FlowModel<float>::Create(flow);
  ParamStore<float>& params = result.model.params();
  AdaMax<float> opt(config.learning_rate, config.beta1, config.beta2, config.epsilon);
  std::mt19937_64 rng(config.seed);
  std::mt19937_64 metric_rng(config.seed + 1);
  const int total = config.warmup + config.iterations;
  auto dequantize = [&](const Tensor<float>& x, std::mt19937_64& r) {
    std::uniform_real_distribution<double> u(0.0, config.dequant_amplitude);
    std::vector<float> v(x.data().begin(), x.data().end());
    for (float& e : v) e += static_cast<float>(u(r));
    return Tensor<float>(x.shape(), std::move(v));
  };
  for (int step = 1; step <= total; ++step) {
    const Tensor<float> x =
        ToModelSpace<float>(RandomCrops(corpus, config.batch_size, config.patch, rng));
    params.ZeroGrad();
    MetricsRow row;
    row.step = step;
    Tensor<float> loss;
    if (step <= config.warmup) {
      loss = NllLoss(result.model, dequantize(x, rng), config.train_step);
      row.loss = loss.item();
      row.nll = row.loss / static_cast<double>(config.patch * config.patch);
    } else {
      RdTerms<float> t = RdLoss(result.model, x, config.lambda, config.train_step, rng);
      loss = t.loss;
      row.loss = loss.item();
      row.rate = t.rate.item();
      row.distortion = t.distortion.item();
      row.psnr = Psnr(row.distortion);
    }
    if (!std::isfinite(row.loss)) {
      throw NumericError("training diverged at step " + std::to_string(step));
    }
    loss.Backward();
    opt.Step(params);
    if (step % config.log_every == 0 || step == 1 || step == total) {
      if (step > config.warmup) {
        NoGradGuard no_grad;
        row.nll = NllLoss(result.model, dequantize(x, metric_rng), config.train_step).item() /
                  static_cast<double>(config.patch * config.patch);
      }
      result.history.push_back(row);
      if (on_log) on_log(row);
    }
  }
  return result;
}

QuantSpec FinetuneSteps(const FlowModel<double>& frozen, const std::vector<Image>& images,
                        double lambda, const FinetuneOptions& options) {
  if (images.empty()) throw UsageError("fine-tuning needs at least one image");
  if (!(lambda > 0)) throw UsageError("lambda must be > 0");
  if (!(options.initial_step > 0) || !(options.learning_rate > 0)) {
    throw UsageError("fine-tuning: initial step and learning rate must be > 0");
  }
  const double weight = DistortionWeight(lambda);
  FlowModel<double> model = frozen.Cast<double>();
  model.params().SetRequiresGrad(false);
  const int levels = model.num_latents();
  const int64_t channels = model.prior_channels();

  struct Sample {
    Tensor<double> x;
    std::vector<Tensor<double>> latents;
  };
  std::vector<Sample> samples;
  {
    NoGradGuard no_grad;
    for (const Image& img : images) {
      Sample s;
      s.x = ToModelSpace<double>({ReflectPad(img, model.granularity())});
      s.latents = model.Forward(s.x).latents;
      samples.push_back(std::move(s));
    }
  }

  // theta = [log step of latents 1..L-1, log steps of latent 0 channels]
  std::vector<double> theta(static_cast<size_t>(levels - 1 + channels),
                            std::log(options.initial_step));
  std::vector<double> previous = theta;
  Adam opt(options.learning_rate, theta.size());
  bool halved = false;
  for (int it = 0; it < options.iterations; ++it) {
    std::vector<Tensor<double>> cond_log;
    for (int k = 1; k < levels; ++k) cond_log.emplace_back(Shape{1}, theta[k - 1], true);
    Tensor<double> prior_log(
        {channels}, std::vector<double>(theta.begin() + (levels - 1), theta.end()), true);
    const Tensor<double> prior_step = Exp(prior_log);
    std::vector<Tensor<double>> cond_step;
    for (const auto& t : cond_log) cond_step.push_back(Exp(t));

    Tensor<double> total;
    for (const Sample& s : samples) {
      std::vector<Tensor<double>> zhat = {SteRoundToGrid(s.latents[0], prior_step)};
      for (int k = 1; k < levels; ++k) zhat.push_back(SteRoundToGrid(s.latents[k], cond_step[k - 1]));
      const auto features = model.ReconstructAllFeatures(zhat);
      Tensor<double> bits = Sum(PriorBits(model.params(), zhat[0], prior_step, false));
      for (int k = 1; k < levels; ++k) {
        const Conditional<double> cond = model.Conditioning(k, features[k]);
        bits = Add(bits, Sum(ConditionalBits(zhat[k], cond, cond_step[k - 1], false)));
      }
      const Tensor<double> rate = Scale(bits, 1.0 / static_cast<double>(PixelsOf(s.x)));
      const Tensor<double> loss = Add(rate, Scale(MeanSquared(model.Inverse(zhat), s.x), weight));
      total = total.defined() ? Add(total, loss) : loss;
    }
    total = Scale(total, 1.0 / static_cast<double>(samples.size()));
    if (!std::isfinite(total.item())) {
      if (halved) {
        throw NumericError("step fine-tuning diverged at iteration " + std::to_string(it));
      }
      halved = true;
      theta = previous;
      opt.set_lr(opt.lr() / 2);
      continue;
    }
    total.Backward();
    std::vector<double> grads(theta.size());
    for (int k = 1; k < levels; ++k) grads[k - 1] = cond_log[k - 1].grad()[0];
    const auto gp = prior_log.grad();
    std::copy(gp.begin(), gp.end(), grads.begin() + (levels - 1));
    previous = theta;
    opt.Step(theta, grads);
  }
  QuantSpec q;
  for (int k = 1; k < levels; ++k) q.conditional.push_back(std::exp(theta[k - 1]));
  for (int64_t c = 0; c < channels; ++c) q.prior.push_back(std::exp(theta[levels - 1 + c]));
  return q;
}

RdPoint MeasureRd(const FlowModel<double>& model, const std::vector<Image>& images,
                  const QuantSpec& steps) {
  if (images.empty()) throw UsageError("no images to measure");
  RdPoint p;
  p.steps = steps;
  CodingOptions options;
  options.steps = steps;
  for (const Image& img : images) {
    const Bitstream bs = EncodeImage(model, img, options);
    p.bpp += BitsPerPixel(bs);
    p.psnr += Psnr(img, DecodeImage(model, bs));
  }
  p.bpp /= static_cast<double>(images.size());
  p.psnr /= static_cast<double>(images.size());
  return p;
}

std::vector<RdPoint> RdSweep(const FlowModel<double>& model, const std::vector<Image>& images,
                             const std::vector<double>& lambdas, const FinetuneOptions& options) {
  std::vector<RdPoint> out;
  for (double lambda : lambdas) {
    RdPoint p = MeasureRd(model, images, FinetuneSteps(model, images, lambda, options));
    p.lambda = lambda;
    out.push_back(std::move(p));
  }
  return out;
}

std::string RdCsvHeader() { return "lambda,bpp,psnr,step_coarsest,step_finest\n"; }

std::string RdCsvRow(const RdPoint& p) {
  std::ostringstream out = CsvStream();
  out << p.lambda << "," << p.bpp << "," << p.psnr << ",";
  out << (p.steps.conditional.empty() ? 0.0 : p.steps.conditional.front()) << ","
      << (p.steps.conditional.empty() ? 0.0 : p.steps.conditional.back()) << "\n";
  return out.str();
}

template class AdaMax<float>;
template class AdaMax<double>;
template Tensor<float> NllLoss(const FlowModel<float>&, const Tensor<float>&, double);
template Tensor<double> NllLoss(const FlowModel<double>&, const Tensor<double>&, double);
template RdTerms<float> RdLoss(const FlowModel<float>&, const Tensor<float>&, double, double,
                               std::mt19937_64&);
template RdTerms<double> RdLoss(const FlowModel<double>&, const Tensor<double>&, double, double,
                                std::mt19937_64&);
template Tensor<float> SamplingReconstruction(const FlowModel<float>&, const Tensor<float>&,
                                              const std::vector<double>&);
template Tensor<double> SamplingReconstruction(const FlowModel<double>&, const Tensor<double>&,
                                               const std::vector<double>&);

}  // namespace nfc

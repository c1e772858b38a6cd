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

#include "nfc/entropy_model.h"

#include <cmath>
#include <iomanip>
#include <locale>
#include <sstream>

#include "nfc/error.h"
#include "nfc/ops.h"

namespace nfc {
namespace {

// Below this logit gap the bin is treated as empty for gradient purposes.
constexpr double kMinLogitGap = 1e-30;

std::string StageName(const char* kind, int i) { return std::string("prior.") + kind + std::to_string(i); }

template <typename T>
T Softplus1(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T Sigmoid1(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// log(sigmoid(a) - sigmoid(b)) for a > b, accurate in both tails.
template <typename T>
T LogBinMass(T a, T b) {
  const T gap = std::max(a - b, static_cast<T>(kMinLogitGap));
  return -Softplus1(-a) - Softplus1(b) + std::log(-std::expm1(-gap));
}

double FlooredBinProb(double upper, double lower) {
  return std::max(std::exp(LogBinMass(upper, lower)), kProbabilityFloor);
}

// Channel axis 1, everything after it is spatial.
struct ChannelLayout {
  int64_t channels;
  int64_t inner;
};

ChannelLayout LayoutOf(const Shape& s) {
  if (s.size() < 2) throw UsageError("expected a tensor with a channel axis, got " + ShapeString(s));
  int64_t inner = 1;
  for (size_t i = 2; i < s.size(); ++i) inner *= s[i];
  return {s[1], inner};
}

}  // namespace

QuantSpec QuantSpec::Uniform(int num_latents, int64_t prior_channels, double step) {
  QuantSpec q;
  q.conditional.assign(static_cast<size_t>(std::max(num_latents - 1, 0)), step);
  q.prior.assign(static_cast<size_t>(prior_channels), step);
  return q;
}

void QuantSpec::Validate(int num_latents, int64_t prior_channels) const {
  if (static_cast<int>(conditional.size()) != num_latents - 1 ||
      static_cast<int64_t>(prior.size()) != prior_channels) {
    throw MismatchError("quantization steps: expected " + std::to_string(num_latents - 1) +
                        " scalar steps and " + std::to_string(prior_channels) +
                        " prior channels, got " + std::to_string(conditional.size()) + " and " +
                        std::to_string(prior.size()));
  }
  for (double v : conditional) {
    if (!std::isfinite(v) || v <= 0) throw UsageError("quantization steps must be finite and > 0");
  }
  for (double v : prior) {
    if (!std::isfinite(v) || v <= 0) throw UsageError("quantization steps must be finite and > 0");
  }
}

std::string FormatQuantSpec(const QuantSpec& q) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  out << q.conditional.size() + q.prior.size() << "\n";
  for (auto it = q.conditional.rbegin(); it != q.conditional.rend(); ++it) out << *it << "\n";
  for (double v : q.prior) out << v << "\n";
  return out.str();
}

QuantSpec ParseQuantSpec(const std::string& text, int num_latents) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  size_t count = 0;
  if (!(in >> count)) throw FormatError("step file: missing count line");
  if (count < static_cast<size_t>(num_latents)) {
    throw FormatError("step file: " + std::to_string(count) + " values is too few for " +
                      std::to_string(num_latents) + " latents");
  }
  std::vector<double> values(count);
  for (size_t i = 0; i < count; ++i) {
    if (!(in >> values[i])) {
      throw FormatError("step file: expected " + std::to_string(count) + " values, read " +
                        std::to_string(i));
    }
    if (!std::isfinite(values[i]) || values[i] <= 0) {
      throw FormatError("step file: value " + std::to_string(i + 1) + " is not a positive step");
    }
  }
  std::string extra;
  if (in >> extra) throw FormatError("step file: trailing content '" + extra + "'");
  QuantSpec q;
  const size_t nc = static_cast<size_t>(num_latents - 1);
  q.conditional.assign(values.rend() - static_cast<std::ptrdiff_t>(nc), values.rend());
  q.prior.assign(values.begin() + static_cast<std::ptrdiff_t>(nc), values.end());
  return q;
}

template <typename T>
void RegisterFactorizedPrior(ParamStore<T>& params, int64_t channels, int width,
                             double init_scale) {
  const std::vector<int64_t> dims = {1, width, width, width, 1};
  const double scale = std::pow(init_scale, 1.0 / kPriorStages);
  for (int i = 0; i < kPriorStages; ++i) {
    const double init = std::log(std::expm1(1.0 / scale / static_cast<double>(dims[i + 1])));
    params.Add(StageName("matrix", i),
               Tensor<T>({channels, dims[i + 1], dims[i]}, static_cast<T>(init), true));
    params.Add(StageName("bias", i), Tensor<T>({channels, dims[i + 1]}, T(0), true));
    if (i + 1 < kPriorStages) {
      params.Add(StageName("factor", i), Tensor<T>({channels, dims[i + 1]}, T(0), true));
    }
  }
}

template <typename T>
Tensor<T> PriorLogits(const ParamStore<T>& params, const Tensor<T>& x) {
  // Inputs: x, matrix0..3, bias0..3, factor0..2.
  std::vector<Tensor<T>> inputs = {x};
  for (int i = 0; i < kPriorStages; ++i) inputs.push_back(params.Get(StageName("matrix", i)));
  for (int i = 0; i < kPriorStages; ++i) inputs.push_back(params.Get(StageName("bias", i)));
  for (int i = 0; i + 1 < kPriorStages; ++i) inputs.push_back(params.Get(StageName("factor", i)));
  const ChannelLayout lay = LayoutOf(x.shape());
  const int64_t width = inputs[1].dim(1);
  if (inputs[1].dim(0) != lay.channels) {
    throw MismatchError("prior has " + std::to_string(inputs[1].dim(0)) +
                        " channels, latent has " + std::to_string(lay.channels));
  }
  const int64_t w = width;
  const std::vector<int64_t> dims = {1, w, w, w, 1};

  // Per-channel transformed parameters, shared by forward and backward.
  struct Stage {
    std::vector<T> m, b, g;  // softplus(matrix), bias, tanh(factor)
  };
  auto transformed = std::make_shared<std::vector<Stage>>(kPriorStages);
  for (int i = 0; i < kPriorStages; ++i) {
    auto& st = (*transformed)[i];
    for (T v : inputs[1 + i].data()) st.m.push_back(Softplus1(v));
    st.b.assign(inputs[5 + i].data().begin(), inputs[5 + i].data().end());
    if (i + 1 < kPriorStages) {
      for (T v : inputs[9 + i].data()) st.g.push_back(std::tanh(v));
    }
  }

  // Evaluates the chain for one element, optionally recording the
  // pre-activation y and the stage input of every stage.
  auto chain = [transformed, dims](int64_t c, T x0, T* ys, T* xs) {
    T cur[8] = {x0};
    T next[8];
    for (int i = 0; i < kPriorStages; ++i) {
      const auto& st = (*transformed)[i];
      const int64_t din = dims[i], dout = dims[i + 1];
      if (xs) std::copy(cur, cur + din, xs + 8 * i);
      for (int64_t o = 0; o < dout; ++o) {
        T acc = st.b[c * dout + o];
        for (int64_t j = 0; j < din; ++j) acc += st.m[(c * dout + o) * din + j] * cur[j];
        if (ys) ys[8 * i + o] = acc;
        next[o] = i + 1 < kPriorStages ? acc + st.g[c * dout + o] * std::tanh(acc) : acc;
      }
      std::copy(next, next + dout, cur);
    }
    return cur[0];
  };
  if (w > 8) throw UsageError("prior width above 8 is not supported");

  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (size_t e = 0; e < xv.size(); ++e) {
    const int64_t c = (static_cast<int64_t>(e) / lay.inner) % lay.channels;
    out[e] = chain(c, xv[e], nullptr, nullptr);
  }
  return MakeResult<T>(x.shape(), std::move(out), inputs,
                       [transformed, chain, dims, lay](autograd::Node<T>& n) {
    auto gx = n.InputGrad(0);
    std::span<T> gm[kPriorStages], gb[kPriorStages], gg[kPriorStages - 1];
    for (int i = 0; i < kPriorStages; ++i) {
      gm[i] = n.InputGrad(1 + i);
      gb[i] = n.InputGrad(5 + i);
      if (i + 1 < kPriorStages) gg[i] = n.InputGrad(9 + i);
    }
    const auto& xv = n.inputs[0]->value;
    T ys[8 * kPriorStages], xs[8 * kPriorStages];
    for (size_t e = 0; e < xv.size(); ++e) {
      const T go = n.grad[e];
      if (go == T(0)) continue;
      const int64_t c = (static_cast<int64_t>(e) / lay.inner) % lay.channels;
      chain(c, xv[e], ys, xs);
      T dcur[8] = {go};  // gradient w.r.t. the output of stage i
      for (int i = kPriorStages - 1; i >= 0; --i) {
        const auto& st = (*transformed)[i];
        const int64_t din = dims[i], dout = dims[i + 1];
        T dy[8];
        for (int64_t o = 0; o < dout; ++o) {
          const T y = ys[8 * i + o];
          if (i + 1 < kPriorStages) {
            const int64_t gi = c * dout + o;
            const T th = std::tanh(y);
            if (!gg[i].empty()) {
              gg[i][gi] += dcur[o] * th * (T(1) - st.g[gi] * st.g[gi]);
            }
            dy[o] = dcur[o] * (T(1) + st.g[gi] * (T(1) - th * th));
          } else {
            dy[o] = dcur[o];
          }
        }
        T dprev[8] = {};
        for (int64_t o = 0; o < dout; ++o) {
          if (!gb[i].empty()) gb[i][c * dout + o] += dy[o];
          for (int64_t j = 0; j < din; ++j) {
            const int64_t mi = (c * dout + o) * din + j;
            if (!gm[i].empty()) {
              // d softplus(raw) / d raw = sigmoid(raw)
              gm[i][mi] += dy[o] * xs[8 * i + j] * Sigmoid1(n.inputs[1 + i]->value[mi]);
            }
            dprev[j] += dy[o] * st.m[mi];
          }
        }
        std::copy(dprev, dprev + din, dcur);
      }
      if (!gx.empty()) gx[e] += dcur[0];
    }
  });
}

template <typename T>
Tensor<T> BinNllFromLogits(const Tensor<T>& upper, const Tensor<T>& lower, bool floor) {
  if (upper.shape() != lower.shape()) {
    throw UsageError("bin nll: shape mismatch " + ShapeString(upper.shape()) + " vs " +
                     ShapeString(lower.shape()));
  }
  const T inv_ln2 = static_cast<T>(1.0 / std::log(2.0));
  const T log_floor = static_cast<T>(std::log(kProbabilityFloor));
  const auto a = upper.data(), b = lower.data();
  std::vector<T> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    T lp = LogBinMass(a[i], b[i]);
    if (floor) lp = std::max(lp, log_floor);
    out[i] = -lp * inv_ln2;
  }
  return MakeResult<T>(upper.shape(), std::move(out), {upper, lower},
                       [floor, inv_ln2, log_floor](autograd::Node<T>& n) {
    const auto& a = n.inputs[0]->value;
    const auto& b = n.inputs[1]->value;
    auto ga = n.InputGrad(0);
    auto gb = n.InputGrad(1);
    for (size_t i = 0; i < a.size(); ++i) {
      if (floor && LogBinMass(a[i], b[i]) < log_floor) continue;
      const T gap = a[i] - b[i];
      const T inv = gap > static_cast<T>(kMinLogitGap) ? T(1) / std::expm1(gap) : T(0);
      const T g = -n.grad[i] * inv_ln2;
      if (!ga.empty()) ga[i] += g * (Sigmoid1(-a[i]) + inv);
      if (!gb.empty()) gb[i] += g * (-Sigmoid1(b[i]) - inv);
    }
  });
}

template <typename T>
Tensor<T> PriorBits(const ParamStore<T>& params, const Tensor<T>& z0, const Tensor<T>& step,
                    bool floor) {
  const Tensor<T> half = Scale(step, T(0.5));
  const Tensor<T> upper = PriorLogits(params, AddBroadcast(z0, half));
  const Tensor<T> lower = PriorLogits(params, AddBroadcast(z0, Scale(half, T(-1))));
  return BinNllFromLogits(upper, lower, floor);
}

template <typename T>
Tensor<T> ConditionalBits(const Tensor<T>& z, const Conditional<T>& cond, const Tensor<T>& step,
                          bool floor) {
  const Tensor<T> half = Scale(step, T(0.5));
  const Tensor<T> centred = Sub(z, cond.mean);
  const Tensor<T> upper = Div(AddBroadcast(centred, half), cond.scale);
  const Tensor<T> lower = Div(AddBroadcast(centred, Scale(half, T(-1))), cond.scale);
  return BinNllFromLogits(upper, lower, floor);
}

template <typename T>
Tensor<T> LatentRateBits(const FlowModel<T>& model, const std::vector<Tensor<T>>& latents,
                         const QuantSpec& q) {
  q.Validate(model.num_latents(), model.prior_channels());
  std::vector<T> prior_steps(q.prior.begin(), q.prior.end());
  Tensor<T> total = Sum(PriorBits(model.params(), latents.at(0),
                                  Tensor<T>({model.prior_channels()}, prior_steps), true));
  const auto features = model.ReconstructAllFeatures(latents);
  for (int k = 1; k < model.num_latents(); ++k) {
    const Conditional<T> cond = model.Conditioning(k, features[k]);
    const Tensor<T> step = Tensor<T>::Constant(static_cast<T>(q.Step(k)));
    total = Add(total, Sum(ConditionalBits(latents.at(k), cond, step, true)));
  }
  return total;
}

PriorEvaluator::PriorEvaluator(const ParamStore<double>& params) {
  const Tensor<double>& m0 = params.Get(StageName("matrix", 0));
  channels_ = m0.dim(0);
  width_ = static_cast<int>(m0.dim(1));
  for (int i = 0; i < kPriorStages; ++i) {
    std::vector<double> m;
    for (double v : params.Get(StageName("matrix", i)).data()) m.push_back(Softplus1(v));
    matrices_.push_back(std::move(m));
    const auto b = params.Get(StageName("bias", i)).data();
    biases_.emplace_back(b.begin(), b.end());
    std::vector<double> g;
    if (i + 1 < kPriorStages) {
      for (double v : params.Get(StageName("factor", i)).data()) g.push_back(std::tanh(v));
    }
    gates_.push_back(std::move(g));
  }
}

double PriorEvaluator::Logit(int64_t c, double x) const {
  const int64_t w = width_;
  const int64_t dims[kPriorStages + 1] = {1, w, w, w, 1};
  std::vector<double> cur = {x}, next;
  for (int i = 0; i < kPriorStages; ++i) {
    const int64_t din = dims[i], dout = dims[i + 1];
    next.assign(static_cast<size_t>(dout), 0.0);
    for (int64_t o = 0; o < dout; ++o) {
      double acc = biases_[i][c * dout + o];
      for (int64_t j = 0; j < din; ++j) acc += matrices_[i][(c * dout + o) * din + j] * cur[j];
      next[o] = i + 1 < kPriorStages ? acc + gates_[i][c * dout + o] * std::tanh(acc) : acc;
    }
    cur.swap(next);
  }
  return cur[0];
}

double PriorEvaluator::Cdf(int64_t c, double x) const { return Sigmoid1(Logit(c, x)); }

double PriorEvaluator::BinProb(int64_t c, double v, double step) const {
  return FlooredBinProb(Logit(c, v + 0.5 * step), Logit(c, v - 0.5 * step));
}

double LogisticBinProb(double v, double mean, double scale, double step) {
  const double centred = v - mean;
  return FlooredBinProb((centred + 0.5 * step) / scale, (centred - 0.5 * step) / scale);
}

int64_t MeanSymbolIndex(double mean, double step) {
  return static_cast<int64_t>(std::nearbyint(mean / step));
}

double MeanSymbol(double mean, double step) {
  return static_cast<double>(MeanSymbolIndex(mean, step)) * step;
}

#define NFC_INSTANTIATE_ENTROPY(T)                                                            \
  template void RegisterFactorizedPrior(ParamStore<T>&, int64_t, int, double);              \
  template Tensor<T> PriorLogits(const ParamStore<T>&, const Tensor<T>&);                   \
  template Tensor<T> BinNllFromLogits(const Tensor<T>&, const Tensor<T>&, bool);            \
  template Tensor<T> PriorBits(const ParamStore<T>&, const Tensor<T>&, const Tensor<T>&,    \
                               bool);                                                       \
  template Tensor<T> ConditionalBits(const Tensor<T>&, const Conditional<T>&,               \
                                     const Tensor<T>&, bool);                               \
  template Tensor<T> LatentRateBits(const FlowModel<T>&, const std::vector<Tensor<T>>&,     \
                                    const QuantSpec&);

NFC_INSTANTIATE_ENTROPY(float)
NFC_INSTANTIATE_ENTROPY(double)

#undef NFC_INSTANTIATE_ENTROPY

}  // namespace nfc

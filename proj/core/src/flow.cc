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

#include "nfc/flow.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nfc/bytes.h"
#include "nfc/entropy_model.h"
#include "nfc/error.h"
#include "nfc/ops.h"

namespace nfc {
namespace {

constexpr uint32_t kModelVersion = 1;
// Network inputs are pixel-scale; this brings them to roughly unit range.
constexpr double kNetworkInputScale = 1.0 / 64.0;
// Spread (in latent units) of the freshly initialized prior.
constexpr double kPriorInitScale = 32.0;

uint64_t Mix(uint64_t seed, const std::string& tag) {
  const auto* p = reinterpret_cast<const uint8_t*>(tag.data());
  return seed ^ Fnv1a64({p, tag.size()});
}

std::vector<int> Shuffled(int n, std::mt19937_64& rng) {
  std::vector<int> v(static_cast<size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<uint64_t>(i + 1));
    std::swap(v[i], v[j]);
  }
  return v;
}

std::vector<int> Inverted(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
  return inv;
}

std::string CouplingPrefix(int level, int step) {
  return "flow.l" + std::to_string(level) + ".s" + std::to_string(step) + ".t";
}

std::string ConditionalPrefix(int k) { return "cond." + std::to_string(k); }

template <typename T>
Tensor<T> RandomConv(int cout, int cin, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<T> w(static_cast<size_t>(cout * cin * 9));
  for (auto& v : w) v = static_cast<T>(normal(rng));
  return Tensor<T>({cout, cin, 3, 3}, std::move(w), true);
}

}  // namespace

std::vector<LevelLayout> BuildLayouts(const FlowConfig& config) {
  if (config.levels < 1 || config.steps < 1 || config.blocks < 0 || config.hidden < 1 ||
      config.in_channels < 1 || config.prior_width < 1) {
    throw UsageError("invalid flow configuration");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<LevelLayout> layouts;
  int64_t channels = config.in_channels;
  for (int l = 0; l < config.levels; ++l) {
    LevelLayout level;
    level.channels = channels * 4;
    level.factor_out = l + 1 < config.levels;
    const int c = static_cast<int>(level.channels);
    for (int k = 0; k < config.steps; ++k) {
      CouplingLayout step;
      step.permutation = Shuffled(c, rng);
      step.inverse_permutation = Inverted(step.permutation);
      std::vector<int> split = Shuffled(c, rng);
      step.part_a.assign(split.begin(), split.begin() + c / 2);
      step.part_b.assign(split.begin() + c / 2, split.end());
      std::sort(step.part_a.begin(), step.part_a.end());
      std::sort(step.part_b.begin(), step.part_b.end());
      std::vector<int> concat = step.part_a;
      concat.insert(concat.end(), step.part_b.begin(), step.part_b.end());
      step.merge = Inverted(concat);
      level.steps.push_back(std::move(step));
    }
    channels = level.factor_out ? level.channels / 2 : level.channels;
    layouts.push_back(std::move(level));
  }
  return layouts;
}

template <typename T>
void RegisterResidualNetwork(ParamStore<T>& params, const std::string& prefix, int in_channels,
                             int hidden, int out_channels, int blocks, uint64_t seed) {
  std::mt19937_64 rng(Mix(seed, prefix));
  params.Add(prefix + ".in.w", RandomConv<T>(hidden, in_channels, std::sqrt(2.0 / (9.0 * in_channels)), rng));
  params.Add(prefix + ".in.b", Tensor<T>({hidden}, T(0), true));
  for (int b = 0; b < blocks; ++b) {
    const std::string blk = prefix + ".block" + std::to_string(b);
    params.Add(blk + ".c1.w", RandomConv<T>(hidden, hidden, std::sqrt(2.0 / (9.0 * hidden)), rng));
    params.Add(blk + ".c1.b", Tensor<T>({hidden}, T(0), true));
    params.Add(blk + ".c2.w", RandomConv<T>(hidden, hidden, std::sqrt(1.0 / (9.0 * hidden)), rng));
    params.Add(blk + ".c2.b", Tensor<T>({hidden}, T(0), true));
  }
  params.Add(prefix + ".out.w", Tensor<T>({out_channels, hidden, 3, 3}, T(0), true));
  params.Add(prefix + ".out.b", Tensor<T>({out_channels}, T(0), true));
}

template <typename T>
Tensor<T> ResidualNetwork(const ParamStore<T>& params, const std::string& prefix, int blocks,
                          const Tensor<T>& x) {
  Tensor<T> h = Relu(Conv2d(Scale(x, static_cast<T>(kNetworkInputScale)),
                            params.Get(prefix + ".in.w"), params.Get(prefix + ".in.b")));
  for (int b = 0; b < blocks; ++b) {
    const std::string blk = prefix + ".block" + std::to_string(b);
    Tensor<T> r = Relu(Conv2d(h, params.Get(blk + ".c1.w"), params.Get(blk + ".c1.b")));
    r = Conv2d(r, params.Get(blk + ".c2.w"), params.Get(blk + ".c2.b"));
    h = Relu(Add(h, r));
  }
  return Conv2d(h, params.Get(prefix + ".out.w"), params.Get(prefix + ".out.b"));
}

template <typename T>
FlowModel<T> FlowModel<T>::Create(const FlowConfig& config) {
  FlowModel m;
  m.config_ = config;
  m.layouts_ = BuildLayouts(config);
  for (int l = 0; l < config.levels; ++l) {
    const int c = static_cast<int>(m.layouts_[l].channels);
    for (int k = 0; k < config.steps; ++k) {
      RegisterResidualNetwork(m.params_, CouplingPrefix(l, k), c / 2, config.hidden, c - c / 2,
                              config.blocks, config.seed);
    }
  }
  for (int k = 1; k < config.levels; ++k) {
    const int c = static_cast<int>(m.layouts_[config.levels - 1 - k].channels / 2);
    RegisterResidualNetwork(m.params_, ConditionalPrefix(k), c, config.hidden, 2 * c,
                            config.blocks, config.seed);
  }
  RegisterFactorizedPrior(m.params_, m.prior_channels(), config.prior_width, kPriorInitScale);
  return m;
}

template <typename T>
FlowModel<T> FlowModel<T>::FromParams(const FlowConfig& config, ParamStore<T> params) {
  const FlowModel reference = Create(config);
  for (const auto& e : reference.params_.entries()) {
    if (!params.Has(e.name)) throw FormatError("model is missing parameter '" + e.name + "'");
    if (params.Get(e.name).shape() != e.value.shape()) {
      throw FormatError("parameter '" + e.name + "' has shape " +
                        ShapeString(params.Get(e.name).shape()) + ", expected " +
                        ShapeString(e.value.shape()));
    }
  }
  if (params.size() != reference.params_.size()) {
    throw FormatError("model has unexpected extra parameters");
  }
  FlowModel m;
  m.config_ = config;
  m.layouts_ = reference.layouts_;
  m.params_ = std::move(params);
  return m;
}

template <typename T>
int64_t FlowModel<T>::prior_channels() const {
  return layouts_.back().channels;
}

template <typename T>
std::vector<Shape> FlowModel<T>::LatentShapes(const Shape& input) const {
  if (input.size() != 4 || input[1] != config_.in_channels || input[2] % granularity() ||
      input[3] % granularity()) {
    throw UsageError("input " + ShapeString(input) + " is not compatible with a " +
                     std::to_string(config_.in_channels) + "-channel model of granularity " +
                     std::to_string(granularity()));
  }
  std::vector<Shape> shapes(static_cast<size_t>(config_.levels));
  int64_t h = input[2], w = input[3];
  for (int l = 0; l < config_.levels; ++l) {
    h /= 2;
    w /= 2;
    const auto& lay = layouts_[l];
    const int k = config_.levels - 1 - l;
    shapes[k] = {input[0], lay.factor_out ? lay.channels / 2 : lay.channels, h, w};
  }
  return shapes;
}

template <typename T>
Tensor<T> FlowModel<T>::ShiftNetwork(int level, int step, const Tensor<T>& u_a) const {
  return ResidualNetwork(params_, CouplingPrefix(level, step), config_.blocks, u_a);
}

template <typename T>
Tensor<T> FlowModel<T>::CouplingForward(int level, int step, const Tensor<T>& u) const {
  const auto& lay = layouts_.at(level).steps.at(step);
  if (u.rank() != 4 || u.dim(1) != layouts_[level].channels) {
    throw UsageError("coupling: input " + ShapeString(u.shape()) + " does not match level " +
                     std::to_string(level));
  }
  Tensor<T> ua = GatherChannels(u, lay.part_a);
  Tensor<T> vb = Add(GatherChannels(u, lay.part_b), ShiftNetwork(level, step, ua));
  return GatherChannels(ConcatChannels<T>({ua, vb}), lay.merge);
}

template <typename T>
Tensor<T> FlowModel<T>::CouplingInverse(int level, int step, const Tensor<T>& v) const {
  const auto& lay = layouts_.at(level).steps.at(step);
  if (v.rank() != 4 || v.dim(1) != layouts_[level].channels) {
    throw UsageError("coupling: input " + ShapeString(v.shape()) + " does not match level " +
                     std::to_string(level));
  }
  Tensor<T> va = GatherChannels(v, lay.part_a);
  Tensor<T> ub = Sub(GatherChannels(v, lay.part_b), ShiftNetwork(level, step, va));
  return GatherChannels(ConcatChannels<T>({va, ub}), lay.merge);
}

template <typename T>
Tensor<T> FlowModel<T>::ForwardLevel(int level, const Tensor<T>& x, Tensor<T>* emitted) const {
  const auto& lay = layouts_[level];
  Tensor<T> y = SpaceToDepth(x);
  for (int k = 0; k < config_.steps; ++k) {
    y = GatherChannels(y, lay.steps[k].permutation);
    y = CouplingForward(level, k, y);
  }
  if (!lay.factor_out) {
    *emitted = y;
    return Tensor<T>();
  }
  const int64_t half = lay.channels / 2;
  *emitted = SliceChannels(y, 0, half);
  return SliceChannels(y, half, lay.channels);
}

template <typename T>
FlowOutput<T> FlowModel<T>::Forward(const Tensor<T>& x) const {
  LatentShapes(x.shape());  // validates
  FlowOutput<T> out;
  out.latents.resize(static_cast<size_t>(config_.levels));
  out.features.resize(static_cast<size_t>(config_.levels));
  Tensor<T> cur = x;
  for (int l = 0; l < config_.levels; ++l) {
    const int k = config_.levels - 1 - l;
    Tensor<T> z;
    cur = ForwardLevel(l, cur, &z);
    out.latents[k] = z;
    if (k > 0) out.features[k] = cur;
  }
  return out;
}

template <typename T>
Tensor<T> FlowModel<T>::InverseLevel(int level, const Tensor<T>& emitted,
                                     const Tensor<T>& continued) const {
  const auto& lay = layouts_.at(level);
  Tensor<T> y = lay.factor_out ? ConcatChannels<T>({emitted, continued}) : emitted;
  if (y.rank() != 4 || y.dim(1) != lay.channels) {
    throw UsageError("inverse: latents " + ShapeString(y.shape()) + " do not match level " +
                     std::to_string(level));
  }
  for (int k = config_.steps - 1; k >= 0; --k) {
    y = CouplingInverse(level, k, y);
    y = GatherChannels(y, lay.steps[k].inverse_permutation);
  }
  return DepthToSpace(y);
}

template <typename T>
Tensor<T> FlowModel<T>::Inverse(const std::vector<Tensor<T>>& latents) const {
  if (static_cast<int>(latents.size()) != config_.levels) {
    throw UsageError("inverse: expected " + std::to_string(config_.levels) + " latents");
  }
  Tensor<T> cur = InverseLevel(config_.levels - 1, latents[0], Tensor<T>());
  for (int l = config_.levels - 2; l >= 0; --l) {
    cur = InverseLevel(l, latents[config_.levels - 1 - l], cur);
  }
  return cur;
}

template <typename T>
Tensor<T> FlowModel<T>::ReconstructFeatures(int k, const std::vector<Tensor<T>>& latents) const {
  if (k < 1 || k >= config_.levels || static_cast<int>(latents.size()) < k) {
    throw UsageError("reconstruct_features: bad latent index " + std::to_string(k));
  }
  Tensor<T> cur = InverseLevel(config_.levels - 1, latents[0], Tensor<T>());
  for (int j = 2; j <= k; ++j) cur = InverseLevel(config_.levels - j, latents[j - 1], cur);
  return cur;
}

template <typename T>
std::vector<Tensor<T>> FlowModel<T>::ReconstructAllFeatures(
    const std::vector<Tensor<T>>& latents) const {
  std::vector<Tensor<T>> out(static_cast<size_t>(config_.levels));
  if (config_.levels < 2) return out;
  out[1] = InverseLevel(config_.levels - 1, latents.at(0), Tensor<T>());
  for (int k = 2; k < config_.levels; ++k) {
    out[k] = InverseLevel(config_.levels - k, latents.at(k - 1), out[k - 1]);
  }
  return out;
}

template <typename T>
Conditional<T> FlowModel<T>::Conditioning(int k, const Tensor<T>& features) const {
  if (k < 1 || k >= config_.levels) {
    throw UsageError("conditioning: bad latent index " + std::to_string(k));
  }
  const int64_t c = layouts_[config_.levels - 1 - k].channels / 2;
  if (features.rank() != 4 || features.dim(1) != c) {
    throw UsageError("conditioning: features " + ShapeString(features.shape()) +
                     " do not match latent " + std::to_string(k));
  }
  Tensor<T> out = ResidualNetwork(params_, ConditionalPrefix(k), config_.blocks, features);
  Conditional<T> cond;
  cond.mean = SliceChannels(out, 0, c);
  cond.scale = Exp(Clamp(SliceChannels(out, c, 2 * c), static_cast<T>(kLogScaleMin),
                         static_cast<T>(kLogScaleMax)));
  return cond;
}

template <typename T>
std::vector<uint8_t> FlowModel<T>::Serialize() const {
  ByteWriter w;
  w.Text("NFC1");
  w.U32(kModelVersion);
  w.U32(static_cast<uint32_t>(config_.levels));
  w.U32(static_cast<uint32_t>(config_.steps));
  w.U32(static_cast<uint32_t>(config_.blocks));
  w.U32(static_cast<uint32_t>(config_.hidden));
  w.U32(static_cast<uint32_t>(config_.in_channels));
  w.U32(static_cast<uint32_t>(config_.prior_width));
  w.U64(config_.seed);
  const std::vector<uint8_t> payload = params_.Serialize(DType::kF64);
  w.U64(payload.size());
  w.Bytes(payload);
  w.U64(Fnv1a64(w.buffer()));
  return w.Take();
}

template <typename T>
FlowModel<T> FlowModel<T>::Deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("model file too short");
  ByteReader tail(bytes.subspan(bytes.size() - 8), "model file");
  if (tail.U64() != Fnv1a64(bytes.first(bytes.size() - 8))) {
    throw FormatError("model file: content hash mismatch");
  }
  ByteReader r(bytes.first(bytes.size() - 8), "model file");
  r.ExpectMagic("NFC1");
  const uint32_t version = r.U32();
  if (version != kModelVersion) {
    throw FormatError("model file: unsupported version " + std::to_string(version));
  }
  FlowConfig config;
  config.levels = static_cast<int>(r.U32());
  config.steps = static_cast<int>(r.U32());
  config.blocks = static_cast<int>(r.U32());
  config.hidden = static_cast<int>(r.U32());
  config.in_channels = static_cast<int>(r.U32());
  config.prior_width = static_cast<int>(r.U32());
  config.seed = r.U64();
  if (config.levels < 1 || config.levels > 8 || config.steps < 1 || config.steps > 64 ||
      config.blocks > 16 || config.hidden < 1 || config.hidden > 4096 ||
      config.in_channels < 1 || config.in_channels > 64 || config.prior_width < 1 ||
      config.prior_width > 64) {
    throw FormatError("model file: implausible architecture header");
  }
  const uint64_t len = r.U64();
  if (len != r.remaining()) throw FormatError("model file: payload length mismatch");
  auto params = ParamStore<T>::Deserialize(r.Bytes(static_cast<size_t>(len)));
  return FromParams(config, std::move(params));
}

template <typename T>
void FlowModel<T>::Save(const std::string& path) const {
  WriteFileBytes(path, Serialize());
}

template <typename T>
FlowModel<T> FlowModel<T>::Load(const std::string& path) {
  return Deserialize(ReadFileBytes(path));
}

template <typename T>
uint64_t FlowModel<T>::ModelId() const {
  const std::vector<uint8_t> bytes = Serialize();
  ByteReader r(std::span<const uint8_t>(bytes).subspan(bytes.size() - 8), "model id");
  return r.U64();
}

template class FlowModel<float>;
template class FlowModel<double>;
template Tensor<float> ResidualNetwork(const ParamStore<float>&, const std::string&, int,
                                       const Tensor<float>&);
template Tensor<double> ResidualNetwork(const ParamStore<double>&, const std::string&, int,
                                        const Tensor<double>&);
template void RegisterResidualNetwork(ParamStore<float>&, const std::string&, int, int, int, int,
                                      uint64_t);
template void RegisterResidualNetwork(ParamStore<double>&, const std::string&, int, int, int,
                                      int, uint64_t);

}  // namespace nfc

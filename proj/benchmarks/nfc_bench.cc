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

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "nfc/codec.h"
#include "nfc/flow.h"
#include "nfc/image.h"
#include "nfc/ops.h"
#include "nfc/range_coder.h"
#include "nfc/trainer.h"

namespace nfc {
namespace {

Tensor<float> Random(const Shape& shape, uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(static_cast<size_t>(NumElements(shape)));
  for (float& e : v) e = n(rng);
  return Tensor<float>(shape, std::move(v), grad);
}

void BM_Conv3x3Forward(benchmark::State& state) {
  const int64_t c = state.range(0);
  const auto x = Random({8, c, 16, 16}, 1);
  const auto w = Random({c, c, 3, 3}, 2);
  const auto b = Random({c}, 3);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(Conv2d(x, w, b));
  state.SetItemsProcessed(state.iterations() * 8 * 16 * 16 * c * c * 9);
}
BENCHMARK(BM_Conv3x3Forward)->Arg(16)->Arg(64);

void BM_Conv3x3Backward(benchmark::State& state) {
  const int64_t c = state.range(0);
  const auto x = Random({8, c, 16, 16}, 1, true);
  const auto w = Random({c, c, 3, 3}, 2, true);
  const auto b = Random({c}, 3, true);
  for (auto _ : state) Sum(Conv2d(x, w, b)).Backward();
}
BENCHMARK(BM_Conv3x3Backward)->Arg(16)->Arg(64);

void BM_RangeCoderRoundTrip(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<double> p(256);
  for (size_t i = 0; i < p.size(); ++i) p[i] = std::exp(-0.05 * static_cast<double>(i));
  const auto table = FrequencyTable::FromProbabilities(p);
  std::discrete_distribution<int> draw(p.begin(), p.end());
  std::vector<int> symbols(100000);
  for (int& s : symbols) s = draw(rng);
  for (auto _ : state) {
    RangeEncoder enc;
    for (int s : symbols) enc.Encode(table, s);
    const auto bytes = enc.Finish();
    RangeDecoder dec(bytes);
    for (size_t i = 0; i < symbols.size(); ++i) benchmark::DoNotOptimize(dec.Decode(table));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(symbols.size()));
}
BENCHMARK(BM_RangeCoderRoundTrip);

struct CodecFixture {
  FlowModel<double> model = FlowModel<double>::Create(FlowConfig{});
  Image image = SyntheticImage(64, 64, 5);
};

void BM_EncodeImage(benchmark::State& state) {
  CodecFixture f;
  CodingOptions o;
  o.steps = QuantSpec::Uniform(3, f.model.prior_channels(), std::ldexp(1.0, -state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(EncodeImage(f.model, f.image, o));
  state.SetItemsProcessed(state.iterations() * f.image.pixels());
}
BENCHMARK(BM_EncodeImage)->Arg(0)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_DecodeImage(benchmark::State& state) {
  CodecFixture f;
  CodingOptions o;
  o.steps = QuantSpec::Uniform(3, f.model.prior_channels(), 1.0);
  const Bitstream bs = EncodeImage(f.model, f.image, o);
  for (auto _ : state) benchmark::DoNotOptimize(DecodeImage(f.model, bs));
  state.SetItemsProcessed(state.iterations() * f.image.pixels());
}
BENCHMARK(BM_DecodeImage)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto model = FlowModel<float>::Create(FlowConfig{});
  std::vector<Image> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(SyntheticImage(32, 32, 10 + i));
  const auto x = ToModelSpace<float>(batch);
  std::mt19937_64 rng(6);
  for (auto _ : state) RdLoss(model, x, 500.0, 1.0, rng).loss.Backward();
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace nfc

BENCHMARK_MAIN();

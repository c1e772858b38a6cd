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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nfc/error.h"
#include "nfc/ops.h"
#include "test_util.h"

namespace nfc {
namespace {

using testing::CheckGradients;
using testing::RandomTensor;

double One(double z, double step, double u) {
  return UniversalQuantize(Tensor<double>({1}, z), step, u).at(0);
}

TEST(UniversalQuantizeTest, WorkedExamples) {
  EXPECT_DOUBLE_EQ(One(0.3, 1.0, 0.4), 0.6);
  EXPECT_DOUBLE_EQ(One(1.499, 1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(One(1.5, 1.0, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(One(2.5, 1.0, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(One(-0.75, 0.5, 0.0), -1.0);
  EXPECT_THROW(One(0.0, 0.0, 0.0), Error);
}

TEST(UniversalQuantizeTest, ErrorIsBoundedByHalfStep) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0, 30);
  for (double step : {0.01, 0.3, 1.0, 7.0}) {
    for (int i = 0; i < 2000; ++i) {
      const double u = SampleNoise(step, rng);
      EXPECT_LE(std::abs(u), step / 2);
      const double v = z(rng);
      EXPECT_LE(std::abs(One(v, step, u) - v), step / 2 * (1 + 1e-12));
    }
  }
}

TEST(UniversalQuantizeTest, ErrorIsUniformAndIndependentOfInput) {
  // With shared dither the error is U(-step/2, step/2) for any fixed input.
  std::mt19937_64 rng(2);
  const double step = 0.8;
  const int n = 100000;
  for (double z : {0.0, 0.37, -5.2}) {
    std::vector<double> err(n);
    for (int i = 0; i < n; ++i) err[i] = (One(z, step, SampleNoise(step, rng)) - z) / step + 0.5;
    std::sort(err.begin(), err.end());
    double ks = 0;
    for (int i = 0; i < n; ++i) {
      const double cdf = std::clamp(err[i], 0.0, 1.0);
      ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n),
                     std::abs(cdf - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LT(ks, 0.01) << "z=" << z;
  }
}

TEST(UniversalQuantizeTest, GradientIsIdentity) {
  std::mt19937_64 rng(3);
  auto z = RandomTensor<double>({2, 3, 2, 2}, rng, 5.0, true);
  auto probe = RandomTensor<double>({2, 3, 2, 2}, rng);
  Sum(Mul(UniversalQuantize(z, 0.7, 0.1), probe)).Backward();
  for (int64_t i = 0; i < z.numel(); ++i) EXPECT_DOUBLE_EQ(z.grad()[i], probe.at(i));
}

TEST(RoundToGridTest, PerChannelSteps) {
  Tensor<double> z({1, 2, 1, 2}, std::vector<double>{0.26, -0.74, 0.26, 1.6});
  const std::vector<double> steps = {0.5, 1.0};
  const auto r = RoundToGrid(z, steps);
  EXPECT_DOUBLE_EQ(r.at(0), 0.5);
  EXPECT_DOUBLE_EQ(r.at(1), -0.5);
  EXPECT_DOUBLE_EQ(r.at(2), 0.0);
  EXPECT_DOUBLE_EQ(r.at(3), 2.0);
  EXPECT_THROW(RoundToGrid(z, std::vector<double>{1, 2, 3}), Error);
}

TEST(RoundToGridTest, IsIdempotent) {
  std::mt19937_64 rng(4);
  const auto z = RandomTensor<double>({1, 4, 3, 3}, rng, 10.0);
  for (double step : {0.1, 0.25, 1.0, 3.0}) {
    const std::vector<double> s = {step};
    const auto once = RoundToGrid(z, s);
    const auto twice = RoundToGrid(once, s);
    for (int64_t i = 0; i < z.numel(); ++i) EXPECT_EQ(once.at(i), twice.at(i));
  }
}

TEST(SteRoundToGridTest, MatchesRoundToGridForward) {
  std::mt19937_64 rng(5);
  const auto z = RandomTensor<double>({2, 3, 2, 2}, rng, 4.0);
  Tensor<double> step({3}, std::vector<double>{0.3, 1.0, 2.5});
  const std::vector<double> s = {0.3, 1.0, 2.5};
  const auto a = SteRoundToGrid(z, step);
  const auto b = RoundToGrid(z, s);
  for (int64_t i = 0; i < z.numel(); ++i) EXPECT_EQ(a.at(i), b.at(i));
}

TEST(SteRoundToGridTest, GradientsMatchFrozenFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto z = RandomTensor<double>({1, 3, 3, 3}, rng, 4.0, true);
  Tensor<double> step({3}, std::vector<double>{0.4, 0.9, 1.7}, true);
  auto probe = RandomTensor<double>({1, 3, 3, 3}, rng);
  RoundCache cache;
  cache.Record();
  RoundCacheScope scope(&cache);
  auto loss = [&] { return Sum(Mul(Square(SteRoundToGrid(z, step)), probe)); };
  loss();
  cache.Replay();
  // Each call to loss() replays the recorded offsets from the start.
  auto replaying = [&] {
    cache.Replay();
    return loss();
  };
  EXPECT_LT(CheckGradients(replaying, {z, step}).max_rel_error, 1e-7);
}

TEST(RoundCacheTest, ReplayFreezesOffsets) {
  RoundCache cache;
  RoundCacheScope scope(&cache);
  cache.Record();
  Tensor<double> x({2}, std::vector<double>{0.4, 1.6});
  EXPECT_EQ(SteRound(x).at(0), 0.0);
  cache.Replay();
  Tensor<double> moved({2}, std::vector<double>{0.6, 1.4});
  const auto r = SteRound(moved);
  EXPECT_DOUBLE_EQ(r.at(0), 0.2);
  EXPECT_DOUBLE_EQ(r.at(1), 1.8);
  EXPECT_THROW(SteRound(moved), Error);  // nothing left to replay
}

}  // namespace
}  // namespace nfc

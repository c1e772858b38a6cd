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

#include "nfc/ops.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nfc/error.h"
#include "test_util.h"

namespace nfc {
namespace {

using testing::CheckGradients;
using testing::RandomTensor;

// Direct 7-loop cross-correlation with zero padding.
std::vector<double> NaiveConv(const Tensor<double>& x, const Tensor<double>& w,
                              const Tensor<double>& b) {
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  std::vector<double> out(static_cast<size_t>(n * cout * h * wd));
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t o = 0; o < cout; ++o) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t xx = 0; xx < wd; ++xx) {
          double acc = b.at(o);
          for (int64_t c = 0; c < cin; ++c) {
            for (int64_t dy = 0; dy < kh; ++dy) {
              for (int64_t dx = 0; dx < kw; ++dx) {
                const int64_t sy = y + dy - kh / 2, sx = xx + dx - kw / 2;
                if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                acc += w.at(((o * cin + c) * kh + dy) * kw + dx) *
                       x.at(((in * cin + c) * h + sy) * wd + sx);
              }
            }
          }
          out[((in * cout + o) * h + y) * wd + xx] = acc;
        }
      }
    }
  }
  return out;
}

TEST(OpsTest, ConvMatchesNaiveOracle) {
  std::mt19937_64 rng(7);
  for (auto [kh, kw] : {std::pair{3, 3}, std::pair{1, 1}, std::pair{5, 3}}) {
    auto x = RandomTensor<double>({2, 3, 5, 6}, rng);
    auto w = RandomTensor<double>({4, 3, kh, kw}, rng);
    auto b = RandomTensor<double>({4}, rng);
    const auto got = Conv2d(x, w, b);
    const auto want = NaiveConv(x, w, b);
    ASSERT_EQ(got.numel(), static_cast<int64_t>(want.size()));
    for (size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.at(i), want[i], 1e-12);
  }
}

TEST(OpsTest, ConvRejectsMismatchedChannels) {
  std::mt19937_64 rng(1);
  auto x = RandomTensor<double>({1, 3, 4, 4}, rng);
  auto w = RandomTensor<double>({2, 4, 3, 3}, rng);
  auto b = RandomTensor<double>({2}, rng);
  EXPECT_THROW(Conv2d(x, w, b), Error);
}

TEST(OpsTest, ConvGradients) {
  std::mt19937_64 rng(2);
  auto x = RandomTensor<double>({2, 2, 4, 5}, rng, 1.0, true);
  auto w = RandomTensor<double>({3, 2, 3, 3}, rng, 1.0, true);
  auto b = RandomTensor<double>({3}, rng, 1.0, true);
  auto probe = RandomTensor<double>({2, 3, 4, 5}, rng);
  auto r = CheckGradients([&] { return Sum(Mul(Conv2d(x, w, b), probe)); }, {x, w, b});
  EXPECT_LT(r.max_rel_error, 1e-7);
}

TEST(OpsTest, ElementwiseGradients) {
  std::mt19937_64 rng(3);
  auto a = RandomTensor<double>({2, 3, 2, 2}, rng, 1.0, true);
  auto b = RandomTensor<double>({2, 3, 2, 2}, rng, 1.0, true);
  auto positive = Tensor<double>({2, 3, 2, 2}, 0.0, true);
  for (auto& v : positive.mutable_data()) v = 0.5 + std::abs(std::normal_distribution<>()(rng));
  auto chan = RandomTensor<double>({3}, rng, 1.0, true);
  auto one = RandomTensor<double>({1}, rng, 1.0, true);
  auto loss = [&] {
    Tensor<double> t = Add(Mul(a, b), Sub(Tanh(a), Sigmoid(b)));
    t = Add(t, Div(Softplus(a), positive));
    t = Add(t, Mul(Exp(Scale(b, 0.3)), Log(positive)));
    t = Add(t, MulBroadcast(AddBroadcast(Square(a), chan), one));
    t = Add(t, AddScalar(Relu(b), 0.5));
    return Sum(t);
  };
  auto r = CheckGradients(loss, {a, b, positive, chan, one});
  EXPECT_LT(r.max_rel_error, 1e-7);
}

TEST(OpsTest, ReductionGradients) {
  std::mt19937_64 rng(4);
  auto a = RandomTensor<double>({2, 3, 2, 2}, rng, 1.0, true);
  auto probe = RandomTensor<double>({2, 2}, rng);
  auto loss = [&] {
    return Add(Sum(Mul(Mean(a, {1, 3}), probe)), Mean(Square(a)));
  };
  EXPECT_LT(CheckGradients(loss, {a}).max_rel_error, 1e-7);
  EXPECT_EQ(Sum(a, {0, 1, 2, 3}).shape(), (Shape{1}));
}

TEST(OpsTest, ClampPassesGradientOnlyInside) {
  Tensor<double> x({3}, std::vector<double>{-2, 0.5, 3}, true);
  Sum(Clamp(x, -1.0, 1.0)).Backward();
  EXPECT_EQ(x.grad()[0], 0);
  EXPECT_EQ(x.grad()[1], 1);
  EXPECT_EQ(x.grad()[2], 0);
}

TEST(OpsTest, LogRejectsNonPositive) {
  EXPECT_THROW(Log(Tensor<double>({1}, 0.0)), Error);
}

TEST(OpsTest, SpaceToDepthLayout) {
  // One channel, 2x2: (row parity, col parity) -> channel 2*py + px.
  Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto y = SpaceToDepth(x);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 1, 1}));
  EXPECT_EQ(y.at(0), 1);
  EXPECT_EQ(y.at(1), 2);
  EXPECT_EQ(y.at(2), 3);
  EXPECT_EQ(y.at(3), 4);
}

TEST(OpsTest, SpaceToDepthRoundTripAndGradient) {
  std::mt19937_64 rng(5);
  auto x = RandomTensor<double>({2, 3, 4, 6}, rng, 1.0, true);
  const auto back = DepthToSpace(SpaceToDepth(x));
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(back.at(i), x.at(i));
  auto probe = RandomTensor<double>({2, 12, 2, 3}, rng);
  EXPECT_LT(CheckGradients([&] { return Sum(Mul(SpaceToDepth(x), probe)); }, {x}).max_rel_error,
            1e-6);
  EXPECT_THROW(SpaceToDepth(RandomTensor<double>({1, 1, 3, 4}, rng)), Error);
}

TEST(OpsTest, ChannelBookkeeping) {
  std::mt19937_64 rng(6);
  auto x = RandomTensor<double>({2, 5, 2, 3}, rng, 1.0, true);
  const auto a = SliceChannels(x, 0, 2);
  const auto b = SliceChannels(x, 2, 5);
  const auto joined = ConcatChannels<double>({a, b});
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(joined.at(i), x.at(i));
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  const auto g = GatherChannels(x, perm);
  EXPECT_EQ(g.at(0), x.at(3 * 6));
  auto probe = RandomTensor<double>({2, 5, 2, 3}, rng);
  auto loss = [&] {
    return Sum(Mul(ConcatChannels<double>({SliceChannels(GatherChannels(x, perm), 3, 5),
                                           SliceChannels(x, 0, 3)}),
                   probe));
  };
  EXPECT_LT(CheckGradients(loss, {x}).max_rel_error, 1e-8);
}

}  // namespace
}  // namespace nfc

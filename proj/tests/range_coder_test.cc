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

#include "nfc/range_coder.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace nfc {
namespace {

std::vector<double> RandomDistribution(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(static_cast<size_t>(n));
  for (auto& v : p) v = std::pow(e(rng), 3.0);
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= sum;
  return p;
}

TEST(FrequencyTableTest, FairCoin) {
  const std::vector<double> p = {0.5, 0.5};
  const auto t = FrequencyTable::FromProbabilities(p);
  EXPECT_EQ(t.size(), 2);
  EXPECT_EQ(t.frequency(0), 32768u);
  EXPECT_EQ(t.frequency(1), 32767u);
  EXPECT_EQ(t.frequency(t.escape()), 1u);
  EXPECT_EQ(t.start(0), 0u);
}

TEST(FrequencyTableTest, TinyProbabilitiesKeepOneCount) {
  const std::vector<double> p = {1e-12, 1.0 - 2e-12, 1e-12};
  const auto t = FrequencyTable::FromProbabilities(p);
  EXPECT_EQ(t.frequency(0), 1u);
  EXPECT_EQ(t.frequency(2), 1u);
  EXPECT_EQ(t.frequency(1), FrequencyTable::kTotal - 3);
}

TEST(FrequencyTableTest, SumsToTotalAndFindInverts) {
  std::mt19937_64 rng(1);
  for (int n : {1, 2, 7, 300, 5000}) {
    const auto t = FrequencyTable::FromProbabilities(RandomDistribution(n, rng));
    uint64_t sum = 0;
    for (int s = 0; s <= t.escape(); ++s) {
      ASSERT_GE(t.frequency(s), 1u);
      sum += t.frequency(s);
      EXPECT_EQ(t.Find(t.start(s)), s);
      EXPECT_EQ(t.Find(t.start(s) + t.frequency(s) - 1), s);
    }
    EXPECT_EQ(sum, FrequencyTable::kTotal);
  }
}

TEST(FrequencyTableTest, RejectsBadInput) {
  EXPECT_ANY_THROW(FrequencyTable::FromProbabilities(std::vector<double>{}));
  EXPECT_ANY_THROW(FrequencyTable::FromProbabilities(std::vector<double>{0.5, -0.1}));
  EXPECT_ANY_THROW(FrequencyTable::FromProbabilities(
      std::vector<double>(FrequencyTable::kMaxSymbols + 1, 1.0)));
}

TEST(RangeCoderTest, RandomRoundTrips) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 200);
    const auto table = FrequencyTable::FromProbabilities(RandomDistribution(n, rng));
    const int count = static_cast<int>(rng() % 300);
    std::vector<int64_t> symbols(static_cast<size_t>(count));
    std::vector<uint32_t> raw(static_cast<size_t>(count));
    RangeEncoder enc;
    for (int i = 0; i < count; ++i) {
      // A few out-of-range values exercise the escape path.
      symbols[i] = rng() % 50 == 0 ? static_cast<int64_t>(rng() % 200000) - 100000
                                   : static_cast<int64_t>(rng() % n);
      raw[i] = static_cast<uint32_t>(rng() & 0x1FF);
      enc.EncodeIndex(table, symbols[i]);
      enc.EncodeBits(raw[i], 9);
    }
    const auto bytes = enc.Finish();
    RangeDecoder dec(bytes);
    for (int i = 0; i < count; ++i) {
      ASSERT_EQ(dec.DecodeIndex(table), symbols[i]) << "trial " << trial << " at " << i;
      ASSERT_EQ(dec.DecodeBits(9), raw[i]);
    }
    EXPECT_EQ(dec.overrun(), 0u) << "trial " << trial;
  }
}

TEST(RangeCoderTest, EscapesCoverWideValues) {
  const auto table = FrequencyTable::FromProbabilities(std::vector<double>{0.9, 0.1});
  const int64_t big = (int64_t{1} << 47) - 1;
  const std::vector<int64_t> values = {-1, 2, INT32_MIN, INT32_MAX, 0, 1, -70000, big, -big, 3};
  RangeEncoder enc;
  for (int64_t v : values) enc.EncodeIndex(table, v);
  const auto bytes = enc.Finish();
  RangeDecoder dec(bytes);
  for (int64_t v : values) EXPECT_EQ(dec.DecodeIndex(table), v);
  EXPECT_EQ(dec.overrun(), 0u);
  RangeEncoder too_far;
  EXPECT_ANY_THROW(too_far.EncodeIndex(table, int64_t{1} << 49));
}

TEST(RangeCoderTest, EscapeCostIsLogarithmicInDistance) {
  const auto table = FrequencyTable::FromProbabilities(std::vector<double>(4, 0.25));
  RangeEncoder enc;
  // Distance 400 past the edge: 16 bits of escape, a side bit and 17 bits of
  // gamma code.
  for (int i = 0; i < 1000; ++i) enc.EncodeIndex(table, i % 2 ? 403 : -400);
  EXPECT_LE(8.0 * static_cast<double>(enc.Finish().size()), 1000 * 34.1 + 64);
}

TEST(RangeCoderTest, WithinOnePercentOfShannon) {
  std::mt19937_64 rng(3);
  const auto p = RandomDistribution(100, rng);
  const auto table = FrequencyTable::FromProbabilities(p);
  std::discrete_distribution<int> draw(p.begin(), p.end());
  double ideal = 0;
  RangeEncoder enc;
  for (int i = 0; i < 10000; ++i) {
    const int s = draw(rng);
    ideal -= std::log2(p[s]);
    enc.Encode(table, s);
  }
  const auto bytes = enc.Finish();
  EXPECT_LE(8.0 * static_cast<double>(bytes.size()), 1.01 * ideal + 64);
}

TEST(RangeCoderTest, DeterministicSymbolCostsAlmostNothing) {
  const auto table = FrequencyTable::FromProbabilities(std::vector<double>{1.0});
  RangeEncoder enc;
  for (int i = 0; i < 100000; ++i) enc.Encode(table, 0);
  // -log2(65535/65536) bits per symbol.
  EXPECT_LE(enc.Finish().size(), 8u);
}

TEST(RangeCoderTest, EmptyStream) {
  RangeEncoder enc;
  const auto bytes = enc.Finish();
  EXPECT_LE(bytes.size(), 5u);
}

}  // namespace
}  // namespace nfc

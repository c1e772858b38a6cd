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

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "nfc/error.h"

namespace nfc {
namespace {

constexpr uint32_t kTop = uint32_t{1} << 24;

// Escaped distances must stay below 2^kMaxEscapeBits.
constexpr int kMaxEscapeBits = 48;

}  // namespace

FrequencyTable FrequencyTable::FromProbabilities(std::span<const double> probabilities) {
  const int n = static_cast<int>(probabilities.size());
  if (n < 1 || n > kMaxSymbols) {
    throw UsageError("frequency table: symbol count " + std::to_string(n) + " out of range");
  }
  double sum = 0;
  for (double p : probabilities) {
    if (!(p >= 0) || !std::isfinite(p)) throw NumericError("frequency table: invalid probability");
    sum += p;
  }
  // One count for the escape and one floor count per symbol come first.
  const uint32_t spare = kTotal - 1 - static_cast<uint32_t>(n);
  std::vector<uint32_t> freq(static_cast<size_t>(n), 1);
  std::vector<double> remainder(static_cast<size_t>(n), 0.0);
  uint32_t assigned = 0;
  if (sum > 0) {
    for (int i = 0; i < n; ++i) {
      const double ideal = probabilities[i] / sum * spare;
      const double whole = std::floor(ideal);
      freq[i] += static_cast<uint32_t>(whole);
      assigned += static_cast<uint32_t>(whole);
      remainder[i] = ideal - whole;
    }
  }
  uint32_t left = spare - std::min(assigned, spare);
  if (left > 0) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](int a, int b) {
      return remainder[a] != remainder[b] ? remainder[a] > remainder[b] : a < b;
    };
    while (left > 0) {
      const uint32_t take = std::min<uint32_t>(left, static_cast<uint32_t>(n));
      std::nth_element(order.begin(), order.begin() + (take - 1), order.end(), better);
      for (uint32_t i = 0; i < take; ++i) freq[order[i]] += 1;
      left -= take;
    }
  }
  FrequencyTable t;
  t.cum_.resize(static_cast<size_t>(n) + 2);
  t.cum_[0] = 0;
  for (int i = 0; i < n; ++i) t.cum_[i + 1] = t.cum_[i] + freq[i];
  t.cum_[n + 1] = t.cum_[n] + 1;
  if (t.cum_[n + 1] != kTotal) throw NumericError("frequency table: counts do not sum to total");
  return t;
}

int FrequencyTable::Find(uint32_t target) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
  return static_cast<int>(it - cum_.begin()) - 1;
}

void RangeEncoder::Encode(const FrequencyTable& table, int symbol) {
  if (symbol < 0 || symbol > table.escape()) {
    throw UsageError("range coder: symbol " + std::to_string(symbol) + " outside table");
  }
  Encode(table.start(symbol), table.frequency(symbol), symbol == table.escape());
}

void RangeEncoder::EncodeIndex(const FrequencyTable& table, int64_t index) {
  if (index >= 0 && index < table.size()) {
    Encode(table, static_cast<int>(index));
    return;
  }
  // Escape: side of the table, then the distance past its edge as an
  // Elias gamma code, so the cost grows with log2 of the distance.
  const bool above = index >= table.size();
  const uint64_t distance = above ? static_cast<uint64_t>(index - table.size()) + 1
                                  : static_cast<uint64_t>(-index);
  if (distance >= (uint64_t{1} << kMaxEscapeBits)) {
    throw NumericError("range coder: escaped value is out of range");
  }
  Encode(table, table.escape());
  EncodeBits(above ? 1 : 0, 1);
  const int n = std::bit_width(distance) - 1;
  for (int i = 0; i < n; ++i) EncodeBits(0, 1);
  EncodeBits(1, 1);
  for (int done = 0; done < n;) {
    const int chunk = std::min(16, n - done);
    EncodeBits(static_cast<uint32_t>(distance >> done) & ((uint32_t{1} << chunk) - 1), chunk);
    done += chunk;
  }
}

void RangeEncoder::EncodeBits(uint32_t value, int bits) {
  const uint32_t total = uint32_t{1} << bits;
  Encode(value << (FrequencyTable::kTotalBits - bits), uint32_t{1} << (FrequencyTable::kTotalBits - bits),
         value + 1 == total);
}

void RangeEncoder::Encode(uint32_t start, uint32_t size, bool last) {
  const uint32_t r = range_ >> FrequencyTable::kTotalBits;
  low_ += static_cast<uint64_t>(r) * start;
  range_ = last ? range_ - r * start : r * size;
  while (range_ < kTop) {
    range_ <<= 8;
    ShiftLow();
  }
}

void RangeEncoder::ShiftLow() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(static_cast<uint32_t>(low_) >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<uint8_t> RangeEncoder::Finish() {
  for (int i = 0; i < 5; ++i) ShiftLow();
  std::vector<uint8_t> out = std::move(out_);
  *this = RangeEncoder();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | NextByte();
}

uint8_t RangeDecoder::NextByte() {
  if (pos_ < data_.size()) return data_[pos_++];
  ++overrun_;
  return 0;
}

void RangeDecoder::Consume(uint32_t start, uint32_t size, bool last, uint32_t r) {
  code_ -= r * start;
  range_ = last ? range_ - r * start : r * size;
  while (range_ < kTop) {
    code_ = (code_ << 8) | NextByte();
    range_ <<= 8;
  }
}

int RangeDecoder::Decode(const FrequencyTable& table) {
  const uint32_t r = range_ >> FrequencyTable::kTotalBits;
  const uint32_t target = std::min(code_ / r, FrequencyTable::kTotal - 1);
  const int s = table.Find(target);
  Consume(table.start(s), table.frequency(s), s == table.escape(), r);
  return s;
}

int64_t RangeDecoder::DecodeIndex(const FrequencyTable& table) {
  const int s = Decode(table);
  if (s != table.escape()) return s;
  const bool above = DecodeBits(1) == 1;
  int n = 0;
  while (DecodeBits(1) == 0) {
    if (++n >= kMaxEscapeBits) throw FormatError("range coder: corrupt escape code");
  }
  uint64_t distance = uint64_t{1} << n;
  for (int done = 0; done < n;) {
    const int chunk = std::min(16, n - done);
    distance |= static_cast<uint64_t>(DecodeBits(chunk)) << done;
    done += chunk;
  }
  const auto d = static_cast<int64_t>(distance);
  return above ? table.size() + d - 1 : -d;
}

uint32_t RangeDecoder::DecodeBits(int bits) {
  const uint32_t r = range_ >> FrequencyTable::kTotalBits;
  const int shift = FrequencyTable::kTotalBits - bits;
  const uint32_t target = std::min(code_ / r, FrequencyTable::kTotal - 1) >> shift;
  Consume(target << shift, uint32_t{1} << shift, target + 1 == (uint32_t{1} << bits), r);
  return target;
}

}  // namespace nfc

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

#ifndef NFC_RANGE_CODER_H_
#define NFC_RANGE_CODER_H_

#include <cstdint>
#include <span>
#include <vector>

namespace nfc {

// Integer frequencies summing to 2^16 over n symbols plus a trailing escape
// symbol. Every symbol keeps at least one count.
class FrequencyTable {
 public:
  static constexpr int kTotalBits = 16;
  static constexpr uint32_t kTotal = uint32_t{1} << kTotalBits;
  static constexpr int kMaxSymbols = static_cast<int>(kTotal) - 2;

  // Largest-remainder quantization of `probabilities` (need not be
  // normalized). Ties in the remainder go to the lower index.
  static FrequencyTable FromProbabilities(std::span<const double> probabilities);

  int size() const { return static_cast<int>(cum_.size()) - 2; }
  int escape() const { return size(); }
  uint32_t start(int symbol) const { return cum_[symbol]; }
  uint32_t frequency(int symbol) const { return cum_[symbol + 1] - cum_[symbol]; }
  // Symbol whose interval contains `target` (< kTotal).
  int Find(uint32_t target) const;

 private:
  std::vector<uint32_t> cum_;
};

class RangeEncoder {
 public:
  void Encode(const FrequencyTable& table, int symbol);
  // Codes `index` directly when it is inside the table, otherwise the escape
  // symbol, a side bit and an Elias gamma code of the distance past the
  // table edge.
  void EncodeIndex(const FrequencyTable& table, int64_t index);
  // Uniform value of up to 16 bits.
  void EncodeBits(uint32_t value, int bits);
  std::vector<uint8_t> Finish();

 private:
  void Encode(uint32_t start, uint32_t size, bool last);
  void ShiftLow();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> data);

  int Decode(const FrequencyTable& table);
  int64_t DecodeIndex(const FrequencyTable& table);
  uint32_t DecodeBits(int bits);

  // Bytes requested beyond the end of the input (read as zero).
  size_t overrun() const { return overrun_; }

 private:
  uint8_t NextByte();
  void Consume(uint32_t start, uint32_t size, bool last, uint32_t r);

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  size_t overrun_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace nfc

#endif  // NFC_RANGE_CODER_H_

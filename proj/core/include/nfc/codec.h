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

#ifndef NFC_CODEC_H_
#define NFC_CODEC_H_

#include <cstdint>
#include <vector>

#include "nfc/bitstream.h"
#include "nfc/entropy_model.h"
#include "nfc/flow.h"
#include "nfc/image.h"
#include "nfc/tensor.h"

namespace nfc {

inline constexpr double kDefaultSkipThreshold = 0.9;
inline constexpr double kDefaultPartialFraction = 0.5;
// Half-width of a conditional coding window, in multiples of the scale.
inline constexpr double kWindowScales = 12.0;
// Wider symbol runs are coded as a bucket from the table plus raw bits.
inline constexpr int64_t kMaxTableBuckets = 4096;

struct CodingOptions {
  QuantSpec steps;
  double p_thresh = kDefaultSkipThreshold;
  int level_code = 0;  // 0 transmits everything
  double partial_fraction = kDefaultPartialFraction;
};

struct SectionStats {
  int64_t coded = 0;
  int64_t skipped = 0;
  int64_t escaped = 0;
  // -log2 of the model probability of every coded symbol.
  double ideal_bits = 0;
  // Range coder bytes, without any side information.
  size_t payload_bytes = 0;
};

struct EntropyCoded {
  std::vector<std::vector<uint8_t>> sections;
  std::vector<SectionStats> stats;
  uint64_t split_count = 0;
  // Latents exactly as the decoder will reconstruct them.
  std::vector<Tensor<double>> latents;
};

// Rounds each latent to its grid (per channel for latent 0).
std::vector<Tensor<double>> QuantizeLatents(const std::vector<Tensor<double>>& latents,
                                            const QuantSpec& steps);

EntropyCoded EntropyEncode(const FlowModel<double>& model,
                           const std::vector<Tensor<double>>& quantized, const QuantSpec& steps,
                           double p_thresh, int level_code, uint64_t split_count);

std::vector<Tensor<double>> EntropyDecode(const FlowModel<double>& model,
                                          const std::vector<std::vector<uint8_t>>& sections,
                                          const std::vector<Shape>& shapes,
                                          const QuantSpec& steps, double p_thresh,
                                          int level_code, uint64_t split_count);

Bitstream EncodeImage(const FlowModel<double>& model, const Image& image,
                      const CodingOptions& options, EntropyCoded* details = nullptr);
// Returns the unclamped reconstruction; level_code 0 decodes all that is stored.
Image DecodeImage(const FlowModel<double>& model, const Bitstream& stream, int level_code = 0);
std::vector<Tensor<double>> DecodeLatents(const FlowModel<double>& model, const Bitstream& stream,
                                          int level_code = 0);
Bitstream Truncate(const Bitstream& stream, int level_code);

// Total serialized bits over original pixels.
double BitsPerPixel(const Bitstream& stream);

}  // namespace nfc

#endif  // NFC_CODEC_H_

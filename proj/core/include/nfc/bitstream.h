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

#ifndef NFC_BITSTREAM_H_
#define NFC_BITSTREAM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfc/entropy_model.h"

namespace nfc {

// Decode depth in half levels: 2 * j transmits latents 0..j-1, and
// 2 * L - 1 additionally keeps only the leading part of the finest latent.
int ParseLevelCode(const std::string& text, int num_latents);
std::string FormatLevelCode(int level_code);
bool IsValidLevelCode(int level_code, int num_latents);

struct BitstreamHeader {
  uint16_t version = 1;
  uint64_t model_id = 0;
  uint32_t height = 0;  // original extents
  uint32_t width = 0;
  uint32_t padded_height = 0;
  uint32_t padded_width = 0;
  uint32_t channels = 0;
  uint8_t num_latents = 0;
  QuantSpec steps;
  double p_thresh = 0.9;
  uint8_t level_code = 0;
  // Elements of the finest latent in the leading subsection.
  uint64_t split_count = 0;
};

// Sections: one per latent from the deepest, with the finest latent split in
// two. A section that was not transmitted is empty.
struct Bitstream {
  BitstreamHeader header;
  std::vector<std::vector<uint8_t>> sections;

  std::vector<uint8_t> Serialize() const;
  static Bitstream Parse(std::span<const uint8_t> bytes);
  size_t ByteSize() const;
  // Sections that must be present at `level_code`.
  static size_t SectionsFor(int level_code, int num_latents);
};

}  // namespace nfc

#endif  // NFC_BITSTREAM_H_

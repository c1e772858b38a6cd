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

#include "nfc/bitstream.h"

#include <zlib.h>

#include <cmath>

#include "nfc/bytes.h"
#include "nfc/error.h"

namespace nfc {
namespace {

constexpr uint16_t kBitstreamVersion = 1;
constexpr int kMaxLatents = 8;

uint32_t Crc32(std::span<const uint8_t> data) {
  return static_cast<uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

std::string SectionName(size_t index, int num_latents) {
  const size_t last = static_cast<size_t>(num_latents - 1);
  if (index < last) return "latent " + std::to_string(index);
  return "latent " + std::to_string(last) + (index == last ? " (leading part)" : " (trailing part)");
}

}  // namespace

bool IsValidLevelCode(int level_code, int num_latents) {
  if (level_code == 2 * num_latents - 1 && num_latents >= 2) return true;
  return level_code >= 2 && level_code <= 2 * num_latents && level_code % 2 == 0;
}

int ParseLevelCode(const std::string& text, int num_latents) {
  double v = 0;
  size_t used = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  const double doubled = 2 * v;
  if (used != text.size() || doubled != std::round(doubled) ||
      !IsValidLevelCode(static_cast<int>(doubled), num_latents)) {
    throw UsageError("invalid level '" + text + "' for a " + std::to_string(num_latents) +
                     "-level model (use 1.." + std::to_string(num_latents) + " or " +
                     std::to_string(num_latents - 1) + ".5)");
  }
  return static_cast<int>(doubled);
}

std::string FormatLevelCode(int level_code) {
  return std::to_string(level_code / 2) + (level_code % 2 ? ".5" : "");
}

size_t Bitstream::SectionsFor(int level_code, int num_latents) {
  if (level_code % 2) return static_cast<size_t>(num_latents);
  const size_t whole = static_cast<size_t>(level_code / 2);
  return whole == static_cast<size_t>(num_latents) ? whole + 1 : whole;
}

std::vector<uint8_t> Bitstream::Serialize() const {
  const BitstreamHeader& h = header;
  ByteWriter w;
  w.Text("NFB1");
  w.U16(h.version);
  w.U64(h.model_id);
  w.U32(h.height);
  w.U32(h.width);
  w.U32(h.padded_height);
  w.U32(h.padded_width);
  w.U32(h.channels);
  w.U8(h.num_latents);
  w.U32(static_cast<uint32_t>(h.steps.prior.size()));
  for (double v : h.steps.conditional) w.F64(v);
  for (double v : h.steps.prior) w.F64(v);
  w.F64(h.p_thresh);
  w.U8(h.level_code);
  w.U64(h.split_count);
  if (sections.size() != static_cast<size_t>(h.num_latents) + 1) {
    throw UsageError("bitstream: expected " + std::to_string(h.num_latents + 1) + " sections");
  }
  for (const auto& s : sections) w.U32(static_cast<uint32_t>(s.size()));
  w.U32(Crc32(w.buffer()));
  for (const auto& s : sections) w.Bytes(s);
  return w.Take();
}

Bitstream Bitstream::Parse(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, "bitstream");
  r.ExpectMagic("NFB1");
  Bitstream bs;
  BitstreamHeader& h = bs.header;
  h.version = r.U16();
  if (h.version != kBitstreamVersion) {
    throw FormatError("bitstream: unsupported version " + std::to_string(h.version));
  }
  h.model_id = r.U64();
  h.height = r.U32();
  h.width = r.U32();
  h.padded_height = r.U32();
  h.padded_width = r.U32();
  h.channels = r.U32();
  h.num_latents = r.U8();
  if (h.num_latents < 2 || h.num_latents > kMaxLatents) {
    throw FormatError("bitstream: implausible latent count " + std::to_string(h.num_latents));
  }
  const uint32_t prior_channels = r.U32();
  if (prior_channels == 0 || prior_channels > r.remaining() / 8) {
    throw FormatError("bitstream: implausible step count");
  }
  for (int k = 1; k < h.num_latents; ++k) h.steps.conditional.push_back(r.F64());
  for (uint32_t c = 0; c < prior_channels; ++c) h.steps.prior.push_back(r.F64());
  h.p_thresh = r.F64();
  h.level_code = r.U8();
  h.split_count = r.U64();
  std::vector<uint32_t> lengths(static_cast<size_t>(h.num_latents) + 1);
  for (auto& len : lengths) len = r.U32();
  const size_t header_size = r.position();
  const uint32_t crc = r.U32();
  if (crc != Crc32(bytes.first(header_size))) throw FormatError("bitstream: header CRC mismatch");
  try {
    h.steps.Validate(h.num_latents, prior_channels);
  } catch (const Error& e) {
    throw FormatError(std::string("bitstream: ") + e.what());
  }
  if (!IsValidLevelCode(h.level_code, h.num_latents)) {
    throw FormatError("bitstream: invalid level code " + std::to_string(h.level_code));
  }
  if (h.height == 0 || h.width == 0 || h.padded_height < h.height ||
      h.padded_width < h.width || h.channels == 0) {
    throw FormatError("bitstream: invalid image extents");
  }
  for (size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] > r.remaining()) {
      throw FormatError("bitstream: truncated payload in section " +
                        SectionName(i, h.num_latents) + " (" + std::to_string(r.remaining()) +
                        " of " + std::to_string(lengths[i]) + " bytes)");
    }
    auto s = r.Bytes(lengths[i]);
    bs.sections.emplace_back(s.begin(), s.end());
  }
  if (r.remaining() != 0) {
    throw FormatError("bitstream: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  const size_t needed = SectionsFor(h.level_code, h.num_latents);
  for (size_t i = 0; i < needed; ++i) {
    if (bs.sections[i].empty()) {
      throw FormatError("bitstream: missing section " + SectionName(i, h.num_latents));
    }
  }
  return bs;
}

size_t Bitstream::ByteSize() const { return Serialize().size(); }

}  // namespace nfc

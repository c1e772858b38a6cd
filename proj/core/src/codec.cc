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

#include "nfc/codec.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nfc/error.h"
#include "nfc/quantizer.h"
#include "nfc/range_coder.h"

namespace nfc {
namespace {

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Mass of the logistic between a < b (standardized), accurate in both tails.
double LogisticMass(double a, double b) {
  if (a >= 0) return Sigmoid(-a) - Sigmoid(-b);
  if (b <= 0) return Sigmoid(b) - Sigmoid(a);
  return 1.0 - Sigmoid(-b) - Sigmoid(a);
}

int64_t SymbolIndex(double value, double step) {
  const double q = std::nearbyint(value / step);
  if (!(std::abs(q) < 9e15)) throw NumericError("latent value is not finite on the coding grid");
  return static_cast<int64_t>(q);
}

// Coding table over a run of symbols starting at `origin`. Wide runs are
// grouped into buckets of 2^bucket_bits symbols; the table codes the bucket
// and the offset inside it is sent as raw bits. Symbols outside the run are
// escaped with their distance in symbols.
struct Window {
  int64_t origin = 0;
  int bucket_bits = 0;
  FrequencyTable table;

  int64_t span() const { return static_cast<int64_t>(table.size()) << bucket_bits; }
};

// `mass(first, count)` is the probability of symbols [first, first + count).
template <typename Mass>
Window MakeWindow(int64_t lo, int64_t hi, const Mass& mass) {
  Window w;
  const int64_t n = hi - lo + 1;
  while (((n - 1) >> w.bucket_bits) + 1 > kMaxTableBuckets) ++w.bucket_bits;
  const int64_t size = int64_t{1} << w.bucket_bits;
  const int64_t buckets = ((n - 1) >> w.bucket_bits) + 1;
  w.origin = lo - (buckets * size - n) / 2;
  std::vector<double> p(static_cast<size_t>(buckets));
  for (int64_t i = 0; i < buckets; ++i) p[i] = mass(w.origin + i * size, size);
  w.table = FrequencyTable::FromProbabilities(p);
  return w;
}

void EncodeLowBits(RangeEncoder& enc, uint64_t value, int bits) {
  for (int done = 0; done < bits; done += 16) {
    const int chunk = std::min(16, bits - done);
    enc.EncodeBits(static_cast<uint32_t>(value >> done) & ((uint32_t{1} << chunk) - 1), chunk);
  }
}

uint64_t DecodeLowBits(RangeDecoder& dec, int bits) {
  uint64_t value = 0;
  for (int done = 0; done < bits; done += 16) {
    value |= static_cast<uint64_t>(dec.DecodeBits(std::min(16, bits - done))) << done;
  }
  return value;
}

// Returns true when the symbol had to be escaped.
bool EncodeSymbol(RangeEncoder& enc, const Window& w, int64_t symbol) {
  const int64_t r = symbol - w.origin;
  if (r >= 0 && r < w.span()) {
    enc.Encode(w.table, static_cast<int>(r >> w.bucket_bits));
    EncodeLowBits(enc, static_cast<uint64_t>(r), w.bucket_bits);
    return false;
  }
  enc.EncodeIndex(w.table, r < 0 ? r : w.table.size() + (r - w.span()));
  return true;
}

int64_t DecodeSymbol(RangeDecoder& dec, const Window& w) {
  const int64_t v = dec.DecodeIndex(w.table);
  if (v < 0) return w.origin + v;
  if (v >= w.table.size()) return w.origin + w.span() + (v - w.table.size());
  return w.origin + ((v << w.bucket_bits) |
                     static_cast<int64_t>(DecodeLowBits(dec, w.bucket_bits)));
}

Window ConditionalWindow(int64_t mean_index, double mean, double scale, double step) {
  const auto radius = static_cast<int64_t>(
      std::ceil(std::clamp(kWindowScales * scale / step, 1.0, 1e12)));
  return MakeWindow(mean_index - radius, mean_index + radius, [&](int64_t first, int64_t count) {
    const double lower = (static_cast<double>(first) - 0.5) * step - mean;
    return LogisticMass(lower / scale, (lower + static_cast<double>(count) * step) / scale);
  });
}

// Table of the factorized prior for one channel, covering the 2^-24 and
// 1 - 2^-24 quantiles. Both sides derive it from the model and step alone.
double PriorQuantile(const PriorEvaluator& prior, int64_t c, double target) {
  double lo = -1, hi = 1;
  while (prior.Cdf(c, lo) > target && lo > -1e12) lo *= 2;
  while (prior.Cdf(c, hi) < target && hi < 1e12) hi *= 2;
  for (int i = 0; i < 100 && hi - lo > 1e-9 * (1 + std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (prior.Cdf(c, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Window PriorWindow(const PriorEvaluator& prior, int64_t c, double step) {
  constexpr double kTail = 0x1p-24;
  auto index = [step](double x) { return std::clamp(x / step, -1e15, 1e15); };
  const auto lo = static_cast<int64_t>(std::floor(index(PriorQuantile(prior, c, kTail))));
  const auto hi = static_cast<int64_t>(std::ceil(index(PriorQuantile(prior, c, 1 - kTail))));
  return MakeWindow(lo, hi, [&](int64_t first, int64_t count) {
    const double width = static_cast<double>(count) * step;
    return prior.BinProb(c, static_cast<double>(first) * step + 0.5 * (width - step), width);
  });
}

// Elements [begin, end) of the finest latent belong to sections [first,
// second) of the stream; the others to a single section.
struct Span {
  size_t section;
  int64_t begin;
  int64_t end;
};

std::vector<Span> SpansOf(int k, int num_latents, int64_t numel, uint64_t split) {
  if (k < num_latents - 1) return {{static_cast<size_t>(k), 0, numel}};
  const int64_t s = static_cast<int64_t>(std::min<uint64_t>(split, static_cast<uint64_t>(numel)));
  return {{static_cast<size_t>(k), 0, s}, {static_cast<size_t>(k) + 1, s, numel}};
}

bool SectionPresent(size_t section, int level_code, int num_latents) {
  return section < Bitstream::SectionsFor(level_code, num_latents);
}

std::string LatentName(int k) { return "latent " + std::to_string(k); }

// Conditioning features for latent k from the already final latents
// 0..k-1; `prev` holds the features of latent k - 1.
Tensor<double> NextFeatures(const FlowModel<double>& model, int k,
                            const std::vector<Tensor<double>>& latents,
                            const Tensor<double>& prev) {
  const int levels = model.num_latents();
  return model.InverseLevel(levels - k, latents[k - 1], k == 1 ? Tensor<double>() : prev);
}

void CheckModelStream(const FlowModel<double>& model, const std::vector<Shape>& shapes,
                      const QuantSpec& steps) {
  if (static_cast<int>(shapes.size()) != model.num_latents()) {
    throw MismatchError("latent count does not match the model");
  }
  steps.Validate(model.num_latents(), model.prior_channels());
}

}  // namespace

std::vector<Tensor<double>> QuantizeLatents(const std::vector<Tensor<double>>& latents,
                                            const QuantSpec& steps) {
  steps.Validate(static_cast<int>(latents.size()), latents.at(0).dim(1));
  std::vector<Tensor<double>> out;
  out.push_back(RoundToGrid(latents[0], std::span<const double>(steps.prior)));
  for (size_t k = 1; k < latents.size(); ++k) {
    const double s = steps.Step(static_cast<int>(k));
    out.push_back(RoundToGrid(latents[k], std::span<const double>(&s, 1)));
  }
  return out;
}

EntropyCoded EntropyEncode(const FlowModel<double>& model,
                           const std::vector<Tensor<double>>& quantized, const QuantSpec& steps,
                           double p_thresh, int level_code, uint64_t split_count) {
  const int levels = model.num_latents();
  std::vector<Shape> shapes;
  for (const auto& z : quantized) shapes.push_back(z.shape());
  CheckModelStream(model, shapes, steps);
  if (!IsValidLevelCode(level_code, levels)) {
    throw UsageError("invalid level " + FormatLevelCode(level_code));
  }
  NoGradGuard no_grad;
  EntropyCoded out;
  out.sections.resize(static_cast<size_t>(levels) + 1);
  out.stats.resize(out.sections.size());
  out.split_count = split_count;
  out.latents = quantized;

  // Deepest latent under the factorized prior.
  {
    const Tensor<double>& z0 = quantized[0];
    const int64_t channels = z0.dim(1);
    if (z0.dim(0) != 1) throw UsageError("entropy coding expects a single image");
    const int64_t inner = z0.numel() / channels;
    const PriorEvaluator prior(model.params());
    RangeEncoder enc;
    SectionStats& st = out.stats[0];
    for (int64_t c = 0; c < channels; ++c) {
      const double step = steps.prior[c];
      const Window w = PriorWindow(prior, c, step);
      for (int64_t i = 0; i < inner; ++i) {
        const int64_t q = SymbolIndex(z0.at(c * inner + i), step);
        st.escaped += EncodeSymbol(enc, w, q);
        st.ideal_bits -= std::log2(prior.BinProb(c, static_cast<double>(q) * step, step));
        ++st.coded;
      }
    }
    out.sections[0] = enc.Finish();
    st.payload_bytes = out.sections[0].size();
  }

  Tensor<double> features;
  for (int k = 1; k < levels; ++k) {
    features = NextFeatures(model, k, out.latents, features);
    const Conditional<double> cond = model.Conditioning(k, features);
    const double step = steps.Step(k);
    Tensor<double> zstar = quantized[k].Clone();
    auto zv = zstar.mutable_data();
    const auto mu = cond.mean.data();
    const auto sigma = cond.scale.data();
    for (const Span& span : SpansOf(k, levels, zstar.numel(), split_count)) {
      if (!SectionPresent(span.section, level_code, levels)) continue;
      RangeEncoder enc;
      SectionStats& st = out.stats[span.section];
      for (int64_t j = span.begin; j < span.end; ++j) {
        const int64_t m = MeanSymbolIndex(mu[j], step);
        const double mean_value = static_cast<double>(m) * step;
        if (LogisticBinProb(mean_value, mu[j], sigma[j], step) > p_thresh) {
          zv[j] = mean_value;
          ++st.skipped;
          continue;
        }
        const int64_t q = SymbolIndex(zv[j], step);
        const Window w = ConditionalWindow(m, mu[j], sigma[j], step);
        st.escaped += EncodeSymbol(enc, w, q);
        st.ideal_bits -= std::log2(LogisticBinProb(static_cast<double>(q) * step, mu[j], sigma[j], step));
        ++st.coded;
      }
      out.sections[span.section] = enc.Finish();
      st.payload_bytes = out.sections[span.section].size();
    }
    // Elements beyond the transmitted part take their mean symbol.
    for (const Span& span : SpansOf(k, levels, zstar.numel(), split_count)) {
      if (SectionPresent(span.section, level_code, levels)) continue;
      for (int64_t j = span.begin; j < span.end; ++j) zv[j] = MeanSymbol(mu[j], step);
    }
    out.latents[k] = zstar;
  }
  return out;
}

std::vector<Tensor<double>> EntropyDecode(const FlowModel<double>& model,
                                          const std::vector<std::vector<uint8_t>>& sections,
                                          const std::vector<Shape>& shapes,
                                          const QuantSpec& steps, double p_thresh,
                                          int level_code, uint64_t split_count) {
  const int levels = model.num_latents();
  CheckModelStream(model, shapes, steps);
  if (sections.size() != static_cast<size_t>(levels) + 1) {
    throw FormatError("bitstream has " + std::to_string(sections.size()) + " sections, model needs " +
                      std::to_string(levels + 1));
  }
  NoGradGuard no_grad;
  std::vector<Tensor<double>> latents(static_cast<size_t>(levels));

  {
    const Shape& shape = shapes[0];
    const int64_t channels = shape.at(1);
    const int64_t inner = NumElements(shape) / channels;
    RangeDecoder dec(sections[0]);
    const PriorEvaluator prior(model.params());
    std::vector<double> values(static_cast<size_t>(NumElements(shape)));
    for (int64_t c = 0; c < channels; ++c) {
      const double step = steps.prior[c];
      const Window w = PriorWindow(prior, c, step);
      for (int64_t i = 0; i < inner; ++i) {
        values[c * inner + i] = static_cast<double>(DecodeSymbol(dec, w)) * step;
      }
    }
    if (dec.overrun() > 0) throw FormatError("bitstream: section " + LatentName(0) + " is truncated");
    latents[0] = Tensor<double>(shape, std::move(values));
  }

  Tensor<double> features;
  for (int k = 1; k < levels; ++k) {
    features = NextFeatures(model, k, latents, features);
    const Conditional<double> cond = model.Conditioning(k, features);
    if (cond.mean.shape() != shapes[k]) throw MismatchError("latent shape does not match the model");
    const double step = steps.Step(k);
    const auto mu = cond.mean.data();
    const auto sigma = cond.scale.data();
    std::vector<double> values(static_cast<size_t>(NumElements(shapes[k])));
    for (const Span& span : SpansOf(k, levels, static_cast<int64_t>(values.size()), split_count)) {
      if (!SectionPresent(span.section, level_code, levels)) {
        for (int64_t j = span.begin; j < span.end; ++j) values[j] = MeanSymbol(mu[j], step);
        continue;
      }
      RangeDecoder dec(sections[span.section]);
      for (int64_t j = span.begin; j < span.end; ++j) {
        const int64_t m = MeanSymbolIndex(mu[j], step);
        const double mean_value = static_cast<double>(m) * step;
        if (LogisticBinProb(mean_value, mu[j], sigma[j], step) > p_thresh) {
          values[j] = mean_value;
          continue;
        }
        const Window w = ConditionalWindow(m, mu[j], sigma[j], step);
        values[j] = static_cast<double>(DecodeSymbol(dec, w)) * step;
      }
      if (dec.overrun() > 0) {
        throw FormatError("bitstream: section " + LatentName(k) + " is truncated");
      }
    }
    latents[k] = Tensor<double>(shapes[k], std::move(values));
  }
  return latents;
}

Bitstream EncodeImage(const FlowModel<double>& model, const Image& image,
                      const CodingOptions& options, EntropyCoded* details) {
  const FlowConfig& config = model.config();
  if (image.channels != config.in_channels) {
    throw MismatchError("image has " + std::to_string(image.channels) + " channels, model expects " +
                        std::to_string(config.in_channels));
  }
  if (model.num_latents() < 2) throw UsageError("coding needs a model with at least two levels");
  const int levels = model.num_latents();
  const int level_code = options.level_code == 0 ? 2 * levels : options.level_code;
  if (!IsValidLevelCode(level_code, levels)) {
    throw UsageError("invalid level " + FormatLevelCode(level_code));
  }
  if (!(options.partial_fraction >= 0 && options.partial_fraction <= 1)) {
    throw UsageError("partial fraction must lie in [0, 1]");
  }
  if (!(options.p_thresh > 0 && options.p_thresh <= 1)) {
    throw UsageError("skip threshold must lie in (0, 1]");
  }
  options.steps.Validate(levels, model.prior_channels());

  NoGradGuard no_grad;
  const Image padded = ReflectPad(image, model.granularity());
  const FlowOutput<double> fw = model.Forward(ToModelSpace<double>({padded}));
  const std::vector<Tensor<double>> quantized = QuantizeLatents(fw.latents, options.steps);
  const double finest = static_cast<double>(quantized.back().numel());
  const auto split = static_cast<uint64_t>(std::ceil(options.partial_fraction * finest));
  EntropyCoded coded =
      EntropyEncode(model, quantized, options.steps, options.p_thresh, level_code, split);

  Bitstream bs;
  BitstreamHeader& h = bs.header;
  h.model_id = model.ModelId();
  h.height = static_cast<uint32_t>(image.height);
  h.width = static_cast<uint32_t>(image.width);
  h.padded_height = static_cast<uint32_t>(padded.height);
  h.padded_width = static_cast<uint32_t>(padded.width);
  h.channels = static_cast<uint32_t>(image.channels);
  h.num_latents = static_cast<uint8_t>(levels);
  h.steps = options.steps;
  h.p_thresh = options.p_thresh;
  h.level_code = static_cast<uint8_t>(level_code);
  h.split_count = split;
  bs.sections = coded.sections;
  if (details) *details = std::move(coded);
  return bs;
}

std::vector<Tensor<double>> DecodeLatents(const FlowModel<double>& model, const Bitstream& stream,
                                          int level_code) {
  const BitstreamHeader& h = stream.header;
  if (h.model_id != model.ModelId()) {
    throw MismatchError("bitstream was produced by a different model");
  }
  if (static_cast<int>(h.channels) != model.config().in_channels ||
      h.num_latents != model.num_latents()) {
    throw MismatchError("bitstream layout does not match the model");
  }
  const int code = level_code == 0 ? h.level_code : level_code;
  if (!IsValidLevelCode(code, model.num_latents())) {
    throw UsageError("invalid level " + FormatLevelCode(code));
  }
  if (code > h.level_code) {
    throw UsageError("requested level " + FormatLevelCode(code) + " but the stream stores only " +
                     FormatLevelCode(h.level_code));
  }
  const std::vector<Shape> shapes =
      model.LatentShapes({1, h.channels, h.padded_height, h.padded_width});
  return EntropyDecode(model, stream.sections, shapes, h.steps, h.p_thresh, code, h.split_count);
}

Image DecodeImage(const FlowModel<double>& model, const Bitstream& stream, int level_code) {
  const std::vector<Tensor<double>> latents = DecodeLatents(model, stream, level_code);
  NoGradGuard no_grad;
  const Image full = FromModelSpace(model.Inverse(latents));
  return Crop(full, 0, 0, stream.header.height, stream.header.width);
}

Bitstream Truncate(const Bitstream& stream, int level_code) {
  const int levels = stream.header.num_latents;
  if (!IsValidLevelCode(level_code, levels)) {
    throw UsageError("invalid level " + FormatLevelCode(level_code));
  }
  if (level_code > stream.header.level_code) {
    throw UsageError("cannot truncate a level " + FormatLevelCode(stream.header.level_code) +
                     " stream to level " + FormatLevelCode(level_code));
  }
  Bitstream out = stream;
  out.header.level_code = static_cast<uint8_t>(level_code);
  const size_t keep = Bitstream::SectionsFor(level_code, levels);
  for (size_t i = keep; i < out.sections.size(); ++i) out.sections[i].clear();
  return out;
}

double BitsPerPixel(const Bitstream& stream) {
  return 8.0 * static_cast<double>(stream.ByteSize()) /
         (static_cast<double>(stream.header.height) * static_cast<double>(stream.header.width));
}

}  // namespace nfc

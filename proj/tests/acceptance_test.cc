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

// Acceptance suite. Trains one desk-scale model, then checks every criterion
// and prints a PASS/FAIL line for each. Exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nfc/codec.h"
#include "nfc/entropy_model.h"
#include "nfc/error.h"
#include "nfc/flow.h"
#include "nfc/image.h"
#include "nfc/ops.h"
#include "nfc/quantizer.h"
#include "nfc/range_coder.h"
#include "nfc/trainer.h"
#include "test_util.h"

namespace nfc {
namespace {

constexpr int64_t kImageSize = 32;
constexpr uint64_t kTrainSeed = 101;
constexpr uint64_t kHeldOutSeed = 202;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

TrainConfig DeskConfig() {
  TrainConfig c;  // L=3, K=2, B=1, C=16, lambda 500, 500 steps of batch 8
  c.patch = static_cast<int>(kImageSize);
  return c;
}

struct Shared {
  std::vector<Image> train = SyntheticCorpus(100, kImageSize, kImageSize, kTrainSeed);
  std::vector<Image> held_out = SyntheticCorpus(10, kImageSize, kImageSize, kHeldOutSeed);
  TrainResult first;
  TrainResult second;
  FlowModel<double> model;
};

Shared& State() {
  static Shared* s = [] {
    const auto start = std::chrono::steady_clock::now();
    auto* shared = new Shared;
    shared->first = Train(DeskConfig(), shared->train);
    shared->model = shared->first.model.Cast<double>();
    std::printf("desk model trained in %.1f s\n",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    return shared;
  }();
  return *s;
}

QuantSpec Uniform(const FlowModel<double>& m, double step) {
  return QuantSpec::Uniform(m.num_latents(), m.prior_channels(), step);
}

// 1. Bijectivity of a randomly initialized desk model.
Outcome Bijectivity() {
  FlowConfig config;
  const auto md = testing::RandomizedModel<double>(config, 11, 0.05);
  const auto mf = testing::RandomizedModel<float>(config, 11, 0.05);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pixel(0, 255);
  double err_f = 0, err_d = 0;
  NoGradGuard no_grad;
  for (int i = 0; i < 200; ++i) {
    Image img(3, kImageSize, kImageSize);
    if (i % 2) {
      for (double& v : img.data) v = std::floor(pixel(rng));
    } else {
      img = SyntheticImage(kImageSize, kImageSize, 1000 + i);
    }
    const auto xd = ToModelSpace<double>({img});
    const auto xf = ToModelSpace<float>({img});
    const auto rd = md.Inverse(md.Forward(xd).latents);
    const auto rf = mf.Inverse(mf.Forward(xf).latents);
    for (int64_t j = 0; j < xd.numel(); ++j) {
      err_d = std::max(err_d, std::abs(rd.at(j) - xd.at(j)));
      err_f = std::max(err_f, static_cast<double>(std::abs(rf.at(j) - xf.at(j))));
    }
  }
  return {err_f < 1e-4 && err_d < 1e-8,
          Format("max |f^-1(f(x)) - x|: 32-bit %.3g, 64-bit %.3g", err_f, err_d)};
}

// 2. End-to-end rate-distortion gradients against central differences.
Outcome GradientFidelity() {
  FlowConfig config;
  config.steps = 1;
  config.hidden = 8;
  const auto model = testing::RandomizedModel<double>(config, 21, 0.1);
  std::vector<Image> imgs = {SyntheticImage(8, 8, 22), SyntheticImage(8, 8, 23)};
  const auto x = ToModelSpace<double>(imgs);
  RoundCache cache;
  RoundCacheScope scope(&cache);
  bool recorded = false;
  auto loss = [&] {
    if (recorded) {
      cache.Replay();
    } else {
      cache.Record();
      recorded = true;
    }
    std::mt19937_64 rng(24);
    return RdLoss(model, x, 500.0, 1.0, rng).loss;
  };
  std::vector<Tensor<double>> leaves;
  for (const auto& e : model.params().entries()) leaves.push_back(e.value);
  const auto r = testing::CheckGradients(loss, leaves, 1e-4, 1e-6, 64);
  return {r.max_rel_error < 1e-3, Format("max relative error %.3g over %.0f probes",
                                         r.max_rel_error, r.checked)};
}

// 3. Range coder exactness and efficiency.
Outcome Coder() {
  std::mt19937_64 rng(31);
  auto distribution = [&](int n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(static_cast<size_t>(n));
    double sum = 0;
    for (auto& v : p) sum += (v = std::pow(e(rng), 3.0));
    for (auto& v : p) v /= sum;
    return p;
  };
  int exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    const auto table = FrequencyTable::FromProbabilities(distribution(n));
    std::vector<int64_t> symbols(rng() % 500);
    RangeEncoder enc;
    for (auto& s : symbols) {
      s = rng() % 40 == 0 ? static_cast<int64_t>(rng() % 20000) - 10000
                          : static_cast<int64_t>(rng() % n);
      enc.EncodeIndex(table, s);
    }
    const auto bytes = enc.Finish();
    RangeDecoder dec(bytes);
    bool ok = true;
    for (int64_t s : symbols) ok = ok && dec.DecodeIndex(table) == s;
    exact += ok && dec.overrun() == 0;
  }

  // Shannon bound for i.i.d. draws from a random 100-symbol source.
  const auto p = distribution(100);
  const auto table = FrequencyTable::FromProbabilities(p);
  std::discrete_distribution<int> draw(p.begin(), p.end());
  double shannon = 0;
  RangeEncoder enc;
  for (int i = 0; i < 10000; ++i) {
    const int s = draw(rng);
    shannon -= std::log2(p[s]);
    enc.Encode(table, s);
  }
  const double iid_bits = 8.0 * static_cast<double>(enc.Finish().size());
  const bool iid_ok = std::abs(iid_bits - shannon) <= 0.01 * shannon + 64;

  // Every section of real bitstreams against the model's ideal code length.
  const Shared& s = State();
  bool sections_ok = true;
  double worst = 0;
  for (const Image& img : s.held_out) {
    for (double step : {4.0, 2.0, 1.0, 0.5, 0.25, 1.0 / 16, 1.0 / 64}) {
      CodingOptions o;
      o.steps = Uniform(s.model, step);
      o.p_thresh = 1.0;
      EntropyCoded details;
      EncodeImage(s.model, img, o, &details);
      for (const SectionStats& st : details.stats) {
        const double actual = 8.0 * static_cast<double>(st.payload_bytes);
        const double slack = 0.01 * st.ideal_bits + 64;
        sections_ok = sections_ok && std::abs(actual - st.ideal_bits) <= slack;
        worst = std::max(worst, std::abs(actual - st.ideal_bits) / slack);
      }
    }
  }
  return {exact == 1000 && iid_ok && sections_ok,
          Format("%.0f/1000 exact; i.i.d. %.0f bits vs bound %.0f; worst section at %.2f of slack",
                 exact, iid_bits, shannon, worst)};
}

// 4. Re-encoding the decoded image reproduces the bitstream.
Outcome Idempotence() {
  const Shared& s = State();
  CodingOptions o;
  o.steps = Uniform(s.model, 1.0);
  int stable = 0;
  double drift = 0;
  for (const Image& original : s.held_out) {
    Image current = original;
    std::vector<uint8_t> first;
    double first_psnr = 0;
    bool ok = true;
    for (int it = 0; it <= 17; ++it) {
      const Bitstream bs = EncodeImage(s.model, current, o);
      const auto bytes = bs.Serialize();
      current = DecodeImage(s.model, Bitstream::Parse(bytes));
      const double psnr = Psnr(original, current);
      if (it == 1) {
        first = bytes;
        first_psnr = psnr;
      } else if (it > 1) {
        ok = ok && bytes == first;
        drift = std::max(drift, std::abs(psnr - first_psnr));
      }
    }
    stable += ok;
  }
  return {stable == 10 && drift == 0,
          Format("%.0f/10 images byte-identical over iterations 1..17, PSNR drift %.3g dB",
                 stable, drift)};
}

// 5. Quality range from coarse to near lossless.
Outcome QualityRange() {
  const Shared& s = State();
  const std::vector<double> steps = {4, 2, 1, 0.5, 0.25, 1.0 / 16, 1.0 / 64};
  std::vector<double> bpp(steps.size()), psnr(steps.size());
  double finest_min = 1e9;
  for (size_t i = 0; i < steps.size(); ++i) {
    for (const Image& img : s.held_out) {
      const Bitstream bs = EncodeImage(s.model, img, CodingOptions{Uniform(s.model, steps[i])});
      const double q = Psnr(img, DecodeImage(s.model, bs));
      bpp[i] += BitsPerPixel(bs) / 10;
      psnr[i] += q / 10;
      if (i + 1 == steps.size()) finest_min = std::min(finest_min, q);
    }
  }
  bool monotone = true;
  for (size_t i = 1; i < steps.size(); ++i) {
    monotone = monotone && psnr[i] >= psnr[i - 1] - 0.05 && bpp[i] >= bpp[i - 1] - 0.01;
  }
  std::string detail = "bpp/PSNR:";
  for (size_t i = 0; i < steps.size(); ++i) detail += Format(" %.2f/%.1f", bpp[i], psnr[i]);
  detail += Format("; finest step min PSNR %.1f dB", finest_min);
  return {monotone && finest_min >= 45.0, detail};
}

// 6. Progressive decoding at levels 1, 2, 2.5 and 3.
Outcome Progressive() {
  const Shared& s = State();
  const std::vector<int> codes = {2, 4, 5, 6};
  int ordered = 0;
  std::vector<double> mean_psnr(4), mean_bpp(4);
  for (const Image& img : s.held_out) {
    const Bitstream full = EncodeImage(s.model, img, CodingOptions{Uniform(s.model, 1.0)});
    std::vector<double> psnr, bpp;
    for (size_t i = 0; i < codes.size(); ++i) {
      const Bitstream cut = Truncate(full, codes[i]);
      psnr.push_back(Psnr(img, DecodeImage(s.model, Bitstream::Parse(cut.Serialize()))));
      bpp.push_back(BitsPerPixel(cut));
      mean_psnr[i] += psnr.back() / 10;
      mean_bpp[i] += bpp.back() / 10;
    }
    ordered += psnr[0] < psnr[1] && psnr[1] < psnr[2] && psnr[2] < psnr[3] &&
               bpp[1] < bpp[2] && bpp[2] < bpp[3];
  }
  return {ordered == 10,
          Format("%.0f/10 ordered; mean PSNR", ordered) +
              Format(" %.1f, %.1f, %.1f,", mean_psnr[0], mean_psnr[1], mean_psnr[2]) +
              Format(" %.1f dB; mean bpp %.2f, %.2f,", mean_psnr[3], mean_bpp[0], mean_bpp[1]) +
              Format(" %.2f, %.2f", mean_bpp[2], mean_bpp[3])};
}

// 7. Skip decisions with scales straddling the threshold boundary.
Outcome ThresholdSkip() {
  const double boundary = 1.0 / (2.0 * std::log(19.0));
  FlowConfig config;
  config.hidden = 8;
  int cases = 0, agree = 0, bitwise = 0;
  int64_t skipped_total = 0, coded_total = 0;
  for (int variant = 0; variant < 6; ++variant) {
    FlowModel<double> model = testing::RandomizedModel<double>(config, 70 + variant, 0.05);
    const double step = std::vector<double>{0.5, 1.0, 2.0}[variant % 3];
    std::mt19937_64 rng(80 + variant);
    std::normal_distribution<double> tiny(0.0, 1e-7);
    // Log-scale outputs pinned at the boundary, jittered by tiny input
    // dependent amounts. Every other mean channel is pinned to a grid point,
    // where the scale alone decides; the rest keep learned-looking means.
    for (auto& e : model.params().entries()) {
      if (!e.name.starts_with("cond.")) continue;
      const bool w = e.name.ends_with(".out.w"), b = e.name.ends_with(".out.b");
      if (!w && !b) continue;
      auto v = e.value.mutable_data();
      const int64_t out = e.value.dim(0);
      const int64_t per = static_cast<int64_t>(v.size()) / out;
      for (int64_t o = 0; o < out; ++o) {
        const bool scale_channel = o >= out / 2;
        if (!scale_channel && o % 2) continue;
        for (int64_t i = 0; i < per; ++i) {
          double& x = v[o * per + i];
          if (scale_channel) {
            x = b ? std::log(boundary * step) + tiny(rng) : tiny(rng) * 1e-2;
          } else {
            x = b ? static_cast<double>(o % 5 - 2) * step : 0.0;
          }
        }
      }
    }
    for (int i = 0; i < 3; ++i) {
      const Image img = SyntheticImage(16, 16, 90 + 10 * variant + i);
      CodingOptions o;
      o.steps = Uniform(model, step);
      EntropyCoded details;
      const Bitstream bs = EncodeImage(model, img, o, &details);
      const auto decoded = DecodeLatents(model, Bitstream::Parse(bs.Serialize()));
      bool same = decoded.size() == details.latents.size();
      for (size_t k = 0; same && k < decoded.size(); ++k) {
        for (int64_t j = 0; j < decoded[k].numel(); ++j) {
          same = same && decoded[k].at(j) == details.latents[k].at(j);
        }
      }
      // Recount the decoder-side skip decisions from the decoded latents.
      const auto features = model.ReconstructAllFeatures(decoded);
      bool counts = true;
      for (int k = 1; k < model.num_latents(); ++k) {
        const Conditional<double> c = model.Conditioning(k, features[k]);
        int64_t skips = 0;
        for (int64_t j = 0; j < c.mean.numel(); ++j) {
          const double m = MeanSymbol(c.mean.at(j), step);
          skips += LogisticBinProb(m, c.mean.at(j), c.scale.at(j), step) > kDefaultSkipThreshold;
        }
        // The finest latent is split over the last two sections.
        int64_t encoder_skips = 0;
        for (size_t sec = static_cast<size_t>(k);
             sec < (k + 1 == model.num_latents() ? details.stats.size() : k + 1); ++sec) {
          encoder_skips += details.stats[sec].skipped;
          skipped_total += details.stats[sec].skipped;
          coded_total += details.stats[sec].coded;
        }
        counts = counts && skips == encoder_skips;
      }
      ++cases;
      bitwise += same;
      agree += same && counts;
    }
  }
  const bool straddles = skipped_total > 0 && coded_total > 0;
  return {agree == cases && straddles,
          Format("%.0f/%.0f cases agree (%.0f bitwise latents);", agree, cases, bitwise) +
              Format(" %.0f skipped, %.0f coded", static_cast<double>(skipped_total),
                     static_cast<double>(coded_total))};
}

// 8. One model, many operating points through step fine-tuning.
Outcome StepFinetuning() {
  const Shared& s = State();
  const std::vector<Image> calibration(s.train.begin(), s.train.begin() + 4);
  const std::vector<double> lambdas = {1, 10, 1e2, 1e3, 1e4, 1e5, 1e6};
  std::vector<RdPoint> points;
  for (double lambda : lambdas) {
    const QuantSpec q = FinetuneSteps(s.model, calibration, lambda);
    RdPoint p = MeasureRd(s.model, s.held_out, q);
    p.lambda = lambda;
    points.push_back(p);
  }
  std::vector<RdPoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  bool pareto = true;
  int distinct = 1;
  for (size_t i = 1; i < sorted.size(); ++i) {
    pareto = pareto && sorted[i].psnr >= sorted[i - 1].psnr - 0.05;
    if (sorted[i].bpp - sorted[i - 1].bpp > 0.01 && sorted[i].psnr - sorted[i - 1].psnr > 0.05) {
      ++distinct;
    }
  }
  bool coarser = true;
  for (size_t i = 1; i < points.size(); ++i) {
    coarser = coarser && points[i].steps.Step(1) <= points[i - 1].steps.Step(1);
  }
  std::string detail = Format("%.0f distinct points;", distinct);
  for (const RdPoint& p : points) detail += Format(" %.2f/%.1f", p.bpp, p.psnr);
  return {pareto && distinct >= 4 && coarser, detail};
}

// 9. Training reduces the loss and is reproducible.
Outcome TrainingSmoke() {
  Shared& s = State();
  s.second = Train(DeskConfig(), s.train);
  const auto& h = s.first.history;
  auto window_mean = [&](size_t begin, size_t end) {
    double sum = 0;
    for (size_t i = begin; i < end; ++i) sum += h[i].loss;
    return sum / static_cast<double>(end - begin);
  };
  const size_t n = std::min<size_t>(5, h.size() / 2);
  const double start = window_mean(0, n), end = window_mean(h.size() - n, h.size());
  const double drop = 1.0 - end / start;
  const bool same = s.first.model.Serialize() == s.second.model.Serialize();
  return {drop >= 0.2 && same,
          Format("loss %.2f -> %.2f (%.1f%% drop over 500 steps); reruns identical: %.0f", start,
                 end, 100 * drop, same)};
}

}  // namespace
}  // namespace nfc

// With arguments, runs only the criteria whose names start with one of them.
int main(int argc, char** argv) {
  using Clock = std::chrono::steady_clock;
  struct Criterion {
    const char* name;
    std::function<nfc::Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"C1 bijectivity", nfc::Bijectivity},
      {"C2 gradient fidelity", nfc::GradientFidelity},
      {"C3 coder exactness and efficiency", nfc::Coder},
      {"C4 re-encoding idempotence", nfc::Idempotence},
      {"C5 quality range", nfc::QualityRange},
      {"C6 progressive reconstruction", nfc::Progressive},
      {"C7 threshold skip", nfc::ThresholdSkip},
      {"C8 step fine-tuning", nfc::StepFinetuning},
      {"C9 training smoke", nfc::TrainingSmoke},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    bool selected = argc == 1;
    for (int i = 1; i < argc; ++i) selected = selected || std::string(c.name).starts_with(argv[i]);
    if (!selected) continue;
    const auto start = Clock::now();
    nfc::Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("%s %s: %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", c.name, r.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += !r.pass;
  }
  return failures == 0 ? 0 : 1;
}

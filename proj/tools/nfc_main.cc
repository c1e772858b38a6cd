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

// nfc: train, tune, encode, decode and inspect flow-codec bitstreams.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfc/bitstream.h"
#include "nfc/bytes.h"
#include "nfc/codec.h"
#include "nfc/error.h"
#include "nfc/flow.h"
#include "nfc/image.h"
#include "nfc/trainer.h"

namespace nfc {
namespace {

std::string ReadText(const std::string& path) {
  const std::vector<uint8_t> b = ReadFileBytes(path);
  return std::string(b.begin(), b.end());
}

void WriteText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()),
                                                text.size()));
}

std::vector<Image> LoadCorpus(const std::string& dir) {
  std::vector<Image> images;
  for (const std::string& path : ListImages(dir)) images.push_back(ReadPpm(path));
  if (images.empty()) throw UsageError("no .ppm images in '" + dir + "'");
  return images;
}

// A step file, or a single number used for every latent.
QuantSpec LoadSteps(const std::string& arg, const FlowModel<double>& model) {
  if (std::filesystem::exists(arg)) return ParseQuantSpec(ReadText(arg), model.num_latents());
  std::istringstream in(arg);
  in.imbue(std::locale::classic());
  double step = 0;
  std::string rest;
  if (!(in >> step) || (in >> rest) || !(step > 0) || !std::isfinite(step)) {
    throw UsageError("--deltas: '" + arg + "' is neither a step file nor a positive number");
  }
  return QuantSpec::Uniform(model.num_latents(), model.prior_channels(), step);
}

std::string Fixed(double v, int digits) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

struct Args {
  std::string model, input, output, config, corpus, deltas, csv, metrics;
  std::string levels = "0";
  std::string lambdas = "1,100,10000,1000000";
  double lambda = 500;
  double p_thresh = kDefaultSkipThreshold;
  int iterations = 0;
  int iters = 17;
  int count = 100;
  int size = 32;
  uint64_t seed = 1;
  bool verify = false;
};

int RunTrain(const Args& a) {
  TrainConfig config = a.config.empty() ? TrainConfig() : ParseTrainConfig(ReadText(a.config));
  ApplySeedOverride(&config);
  if (a.iterations > 0) config.iterations = a.iterations;
  const std::vector<Image> corpus = LoadCorpus(a.corpus);
  std::string csv = MetricsCsvHeader();
  TrainResult result = Train(config, corpus, [&](const MetricsRow& row) {
    csv += MetricsCsvRow(row);
    std::cerr << "step " << row.step << " loss " << row.loss << " rate " << row.rate
              << " psnr " << row.psnr << "\n";
  });
  const FlowModel<double> model = result.model.Cast<double>();
  model.Save(a.output);
  if (!a.metrics.empty()) WriteText(a.metrics, csv);
  std::cout << "model " << a.output << " id " << std::hex << model.ModelId() << std::dec << "\n";
  return 0;
}

int RunFinetune(const Args& a) {
  const auto model = FlowModel<double>::Load(a.model);
  const std::vector<Image> images = LoadCorpus(a.corpus);
  FinetuneOptions options;
  if (a.iterations > 0) options.iterations = a.iterations;
  const QuantSpec q = FinetuneSteps(model, images, a.lambda, options);
  WriteText(a.output, FormatQuantSpec(q));
  std::cout << "steps written to " << a.output << "\n";
  return 0;
}

int RunEncode(const Args& a) {
  const auto model = FlowModel<double>::Load(a.model);
  const Image image = ReadPpm(a.input);
  CodingOptions options;
  options.steps = LoadSteps(a.deltas, model);
  options.p_thresh = a.p_thresh;
  options.level_code = a.levels == "0" ? 0 : ParseLevelCode(a.levels, model.num_latents());
  const Bitstream bs = EncodeImage(model, image, options);
  const std::vector<uint8_t> bytes = bs.Serialize();
  std::string report = "bpp " + Fixed(BitsPerPixel(bs), 4);
  if (a.verify) {
    report += " psnr " + Fixed(Psnr(image, DecodeImage(model, Bitstream::Parse(bytes))), 3);
  }
  WriteFileBytes(a.output, bytes);
  std::cout << report << "\n";
  return 0;
}

int RunDecode(const Args& a) {
  const auto model = FlowModel<double>::Load(a.model);
  const Bitstream bs = Bitstream::Parse(ReadFileBytes(a.input));
  const int code = a.levels == "0" ? 0 : ParseLevelCode(a.levels, bs.header.num_latents);
  WritePpm(a.output, DecodeImage(model, bs, code));
  return 0;
}

int RunTruncate(const Args& a) {
  const Bitstream bs = Bitstream::Parse(ReadFileBytes(a.input));
  if (a.levels == "0") throw UsageError("truncate needs --levels");
  const Bitstream out = Truncate(bs, ParseLevelCode(a.levels, bs.header.num_latents));
  WriteFileBytes(a.output, out.Serialize());
  std::cout << "bpp " << Fixed(BitsPerPixel(out), 4) << "\n";
  return 0;
}

int RunInspect(const Args& a) {
  const Bitstream bs = Bitstream::Parse(ReadFileBytes(a.input));
  const BitstreamHeader& h = bs.header;
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << "version " << h.version << "\nmodel_id " << std::hex << h.model_id << std::dec
      << "\nsize " << h.width << "x" << h.height << "\npadded " << h.padded_width << "x"
      << h.padded_height << "\nchannels " << h.channels << "\nlevels "
      << FormatLevelCode(h.level_code) << "\np_thresh " << h.p_thresh << "\nsplit_count "
      << h.split_count << "\nsteps";
  for (auto it = h.steps.conditional.rbegin(); it != h.steps.conditional.rend(); ++it) {
    out << " " << *it;
  }
  out << " | " << h.steps.prior.size() << " prior channels\n";
  for (size_t i = 0; i < bs.sections.size(); ++i) {
    const size_t last = static_cast<size_t>(h.num_latents - 1);
    std::string name = "z" + std::to_string(std::min(i, last));
    if (i >= last) name += i == last ? "a" : "b";
    out << "section " << name << " " << bs.sections[i].size() << " bytes\n";
  }
  out << "total " << bs.ByteSize() << " bytes, " << Fixed(BitsPerPixel(bs), 4) << " bpp\n";
  std::cout << out.str();
  return 0;
}

int RunRdSweep(const Args& a) {
  const auto model = FlowModel<double>::Load(a.model);
  const std::vector<Image> images = LoadCorpus(a.corpus);
  std::vector<double> lambdas;
  std::stringstream in(a.lambdas);
  in.imbue(std::locale::classic());
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream v(item);
    v.imbue(std::locale::classic());
    double lambda = 0;
    if (!(v >> lambda) || !(lambda > 0)) throw UsageError("--lambdas: bad value '" + item + "'");
    lambdas.push_back(lambda);
  }
  if (lambdas.empty()) throw UsageError("--lambdas is empty");
  FinetuneOptions options;
  if (a.iterations > 0) options.iterations = a.iterations;
  std::string csv = RdCsvHeader();
  for (const RdPoint& p : RdSweep(model, images, lambdas, options)) csv += RdCsvRow(p);
  WriteText(a.csv, csv);
  std::cout << csv;
  return 0;
}

int RunReencodeLoop(const Args& a) {
  const auto model = FlowModel<double>::Load(a.model);
  const Image original = ReadPpm(a.input);
  CodingOptions options;
  options.steps = LoadSteps(a.deltas, model);
  options.p_thresh = a.p_thresh;
  if (a.iters < 1) throw UsageError("--iters must be >= 1");
  std::string csv = "iteration,bpp,psnr\n";
  std::vector<uint8_t> first;
  Image current = original;
  for (int it = 0; it <= a.iters; ++it) {
    const std::vector<uint8_t> bytes = EncodeImage(model, current, options).Serialize();
    Bitstream bs;
    try {
      bs = Bitstream::Parse(bytes);
      current = DecodeImage(model, bs);
    } catch (const Error& e) {
      throw Error(e.code(), "iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it == 1) first = bytes;
    if (it > 1 && bytes != first) {
      throw NumericError("iteration " + std::to_string(it) + ": bitstream differs from iteration 1");
    }
    std::ostringstream row;
    row.imbue(std::locale::classic());
    row.precision(12);
    row << it << "," << BitsPerPixel(bs) << "," << Psnr(original, current) << "\n";
    csv += row.str();
  }
  if (!a.csv.empty()) WriteText(a.csv, csv);
  std::cout << csv;
  return 0;
}

int RunMakeCorpus(const Args& a) {
  std::filesystem::create_directories(a.output);
  const std::vector<Image> images = SyntheticCorpus(a.count, a.size, a.size, a.seed);
  for (size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%04zu.ppm", i);
    WritePpm((std::filesystem::path(a.output) / name).string(), images[i]);
  }
  std::cout << images.size() << " images written to " << a.output << "\n";
  return 0;
}

}  // namespace
}  // namespace nfc

int main(int argc, char** argv) {
  using nfc::Args;
  CLI::App app{"nfc: lossy image codec built on a normalizing flow"};
  app.require_subcommand(1);
  Args a;

  auto* train = app.add_subcommand("train", "Train a model on a directory of PPM images");
  train->add_option("--config", a.config, "key=value training config");
  train->add_option("--corpus", a.corpus, "Directory of .ppm images")->required();
  train->add_option("--out", a.output, "Output model file")->required();
  train->add_option("--metrics", a.metrics, "CSV of training metrics");
  train->add_option("--iterations", a.iterations, "Override the iteration count");

  auto* finetune = app.add_subcommand("finetune", "Fit quantization steps for one lambda");
  finetune->add_option("--model", a.model)->required();
  finetune->add_option("--corpus", a.corpus, "Calibration images")->required();
  finetune->add_option("--lambda", a.lambda)->required();
  finetune->add_option("--out", a.output, "Output step file")->required();
  finetune->add_option("--iterations", a.iterations);

  auto* encode = app.add_subcommand("encode", "Compress a PPM image");
  encode->add_option("--model", a.model)->required();
  encode->add_option("--input", a.input)->required();
  encode->add_option("--deltas", a.deltas, "Step file or a single step")->required();
  encode->add_option("--levels", a.levels, "1, 2, 2.5 or 3 (default: all)");
  encode->add_option("--p-thresh", a.p_thresh, "Skip threshold");
  encode->add_option("--out", a.output)->required();
  encode->add_flag("--verify", a.verify, "Decode again and report PSNR");

  auto* decode = app.add_subcommand("decode", "Decompress to a PPM image");
  decode->add_option("--model", a.model)->required();
  decode->add_option("--input,--bitstream", a.input)->required();
  decode->add_option("--levels", a.levels, "Decode depth (default: all stored)");
  decode->add_option("--out", a.output)->required();

  auto* truncate = app.add_subcommand("truncate", "Drop trailing levels of a bitstream");
  truncate->add_option("--bitstream,--input", a.input)->required();
  truncate->add_option("--levels", a.levels)->required();
  truncate->add_option("--out", a.output)->required();

  auto* inspect = app.add_subcommand("inspect", "Print bitstream header and sections");
  inspect->add_option("--bitstream,--input", a.input)->required();

  auto* sweep = app.add_subcommand("rd-sweep", "Fine-tune steps per lambda and measure RD");
  sweep->add_option("--model", a.model)->required();
  sweep->add_option("--corpus", a.corpus)->required();
  sweep->add_option("--lambdas", a.lambdas, "Comma separated list");
  sweep->add_option("--csv", a.csv)->required();
  sweep->add_option("--iterations", a.iterations);

  auto* loop = app.add_subcommand("reencode-loop", "Decode and re-encode repeatedly");
  loop->add_option("--model", a.model)->required();
  loop->add_option("--input", a.input)->required();
  loop->add_option("--deltas", a.deltas)->required();
  loop->add_option("--iters", a.iters);
  loop->add_option("--p-thresh", a.p_thresh);
  loop->add_option("--csv", a.csv);

  auto* corpus = app.add_subcommand("make-corpus", "Write a synthetic PPM corpus");
  corpus->add_option("--out", a.output)->required();
  corpus->add_option("--count", a.count);
  corpus->add_option("--size", a.size);
  corpus->add_option("--seed", a.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(nfc::ErrorCode::kUsage);
  }

  try {
    if (*train) return nfc::RunTrain(a);
    if (*finetune) return nfc::RunFinetune(a);
    if (*encode) return nfc::RunEncode(a);
    if (*decode) return nfc::RunDecode(a);
    if (*truncate) return nfc::RunTruncate(a);
    if (*inspect) return nfc::RunInspect(a);
    if (*sweep) return nfc::RunRdSweep(a);
    if (*loop) return nfc::RunReencodeLoop(a);
    if (*corpus) return nfc::RunMakeCorpus(a);
  } catch (const nfc::Error& e) {
    std::cerr << "nfc: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nfc: " << e.what() << "\n";
    return static_cast<int>(nfc::ErrorCode::kFormat);
  }
  return static_cast<int>(nfc::ErrorCode::kUsage);
}

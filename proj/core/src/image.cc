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

#include "nfc/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "nfc/bytes.h"
#include "nfc/error.h"

namespace nfc {
namespace {

constexpr double kPsnrCap = 99.0;

int64_t Reflect(int64_t i, int64_t n) {
  const int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Reads one whitespace-delimited header token, skipping comments.
std::string HeaderToken(const std::vector<uint8_t>& b, size_t& pos, const std::string& what) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  if (tok.empty()) throw FormatError(what + ": truncated PPM header");
  return tok;
}

int64_t HeaderNumber(const std::vector<uint8_t>& b, size_t& pos, const std::string& what) {
  const std::string tok = HeaderToken(b, pos, what);
  if (tok.size() > 9 || !std::all_of(tok.begin(), tok.end(), ::isdigit)) {
    throw FormatError(what + ": bad PPM header field '" + tok + "'");
  }
  return std::stoll(tok);
}

}  // namespace

Image DecodePpm(const std::vector<uint8_t>& bytes, const std::string& what) {
  size_t pos = 0;
  if (HeaderToken(bytes, pos, what) != "P6") {
    throw FormatError(what + ": unsupported image format (expected binary PPM 'P6')");
  }
  const int64_t w = HeaderNumber(bytes, pos, what);
  const int64_t h = HeaderNumber(bytes, pos, what);
  const int64_t maxval = HeaderNumber(bytes, pos, what);
  if (w < 1 || h < 1 || w > 1 << 16 || h > 1 << 16) throw FormatError(what + ": bad PPM extents");
  if (maxval != 255) throw FormatError(what + ": only 8-bit PPM (maxval 255) is supported");
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos || bytes.size() - pos < static_cast<size_t>(3 * w * h)) {
    throw FormatError(what + ": truncated PPM pixel data");
  }
  Image img(3, h, w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < 3; ++c) img.at(c, y, x) = bytes[pos++];
    }
  }
  return img;
}

std::vector<uint8_t> EncodePpm(const Image& image) {
  if (image.channels != 3) {
    throw UsageError("PPM output needs 3 channels, image has " + std::to_string(image.channels));
  }
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  for (int64_t y = 0; y < image.height; ++y) {
    for (int64_t x = 0; x < image.width; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        out.push_back(static_cast<uint8_t>(std::clamp(std::nearbyint(image.at(c, y, x)), 0.0, 255.0)));
      }
    }
  }
  return out;
}

Image ReadPpm(const std::string& path) { return DecodePpm(ReadFileBytes(path), path); }

void WritePpm(const std::string& path, const Image& image) {
  WriteFileBytes(path, EncodePpm(image));
}

std::vector<std::string> ListImages(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw FormatError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Image ReflectPad(const Image& image, int64_t multiple) {
  const int64_t h = (image.height + multiple - 1) / multiple * multiple;
  const int64_t w = (image.width + multiple - 1) / multiple * multiple;
  if (h == image.height && w == image.width) return image;
  Image out(image.channels, h, w);
  for (int64_t c = 0; c < image.channels; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        out.at(c, y, x) = image.at(c, Reflect(y, image.height), Reflect(x, image.width));
      }
    }
  }
  return out;
}

Image Crop(const Image& image, int64_t y0, int64_t x0, int64_t height, int64_t width) {
  if (y0 < 0 || x0 < 0 || y0 + height > image.height || x0 + width > image.width) {
    throw UsageError("crop window outside the image");
  }
  Image out(image.channels, height, width);
  for (int64_t c = 0; c < image.channels; ++c) {
    for (int64_t y = 0; y < height; ++y) {
      for (int64_t x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

template <typename T>
Tensor<T> ToModelSpace(const std::vector<Image>& images) {
  if (images.empty()) throw UsageError("empty image batch");
  const Image& first = images[0];
  std::vector<T> v;
  v.reserve(images.size() * first.data.size());
  for (const Image& img : images) {
    if (img.channels != first.channels || img.height != first.height || img.width != first.width) {
      throw UsageError("image batch has mixed extents");
    }
    for (double p : img.data) v.push_back(static_cast<T>(p - kPixelOffset));
  }
  return Tensor<T>({static_cast<int64_t>(images.size()), first.channels, first.height, first.width},
                   std::move(v));
}

template <typename T>
Image FromModelSpace(const Tensor<T>& x, int64_t index) {
  if (x.rank() != 4 || index < 0 || index >= x.dim(0)) {
    throw UsageError("FromModelSpace: bad tensor " + ShapeString(x.shape()));
  }
  Image img(x.dim(1), x.dim(2), x.dim(3));
  const auto v = x.data();
  const size_t n = img.data.size();
  for (size_t i = 0; i < n; ++i) {
    img.data[i] = static_cast<double>(v[static_cast<size_t>(index) * n + i]) + kPixelOffset;
  }
  return img;
}

double MeanSquaredError(const Image& a, const Image& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
    throw UsageError("mse: image extents differ");
  }
  double sum = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double Psnr(double mse, double peak) {
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double Psnr(const Image& a, const Image& b, double peak) {
  return Psnr(MeanSquaredError(a, b), peak);
}

Image SyntheticImage(int64_t height, int64_t width, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  Image img(3, height, width);
  const double tau = 2 * std::numbers::pi;
  double base[3], slope_y[3], slope_x[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 40 + 170 * unit(rng);
    slope_y[c] = (unit(rng) - 0.5) * 80;
    slope_x[c] = (unit(rng) - 0.5) * 80;
  }
  struct Wave {
    double fy, fx, phase, amp[3];
  };
  std::vector<Wave> waves(2);
  for (auto& wv : waves) {
    wv.fy = (unit(rng) - 0.5) * 0.5;
    wv.fx = (unit(rng) - 0.5) * 0.5;
    wv.phase = tau * unit(rng);
    for (double& a : wv.amp) a = 6 + 18 * unit(rng);
  }
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      const double ty = static_cast<double>(y) / static_cast<double>(height) - 0.5;
      const double tx = static_cast<double>(x) / static_cast<double>(width) - 0.5;
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + slope_y[c] * ty + slope_x[c] * tx;
        for (const auto& wv : waves) {
          v += wv.amp[c] * std::sin(tau * (wv.fy * static_cast<double>(y) + wv.fx * static_cast<double>(x)) + wv.phase);
        }
        img.at(c, y, x) = v;
      }
    }
  }
  const int shapes = 1 + static_cast<int>(unit(rng) * 3);
  for (int s = 0; s < shapes; ++s) {
    const bool disc = unit(rng) < 0.5;
    const double cy = unit(rng) * static_cast<double>(height);
    const double cx = unit(rng) * static_cast<double>(width);
    const double ry = (0.1 + 0.25 * unit(rng)) * static_cast<double>(height);
    const double rx = (0.1 + 0.25 * unit(rng)) * static_cast<double>(width);
    double color[3];
    for (double& v : color) v = 20 + 215 * unit(rng);
    for (int64_t y = 0; y < height; ++y) {
      for (int64_t x = 0; x < width; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry;
        const double dx = (static_cast<double>(x) - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1 && std::abs(dx) <= 1;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
      }
    }
  }
  for (double& v : img.data) v = std::clamp(std::nearbyint(v + noise(rng)), 0.0, 255.0);
  return img;
}

std::vector<Image> SyntheticCorpus(int count, int64_t height, int64_t width, uint64_t seed) {
  std::vector<Image> out;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) out.push_back(SyntheticImage(height, width, rng()));
  return out;
}

template Tensor<float> ToModelSpace(const std::vector<Image>&);
template Tensor<double> ToModelSpace(const std::vector<Image>&);
template Image FromModelSpace(const Tensor<float>&, int64_t);
template Image FromModelSpace(const Tensor<double>&, int64_t);

}  // namespace nfc

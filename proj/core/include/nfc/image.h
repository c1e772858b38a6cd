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

#ifndef NFC_IMAGE_H_
#define NFC_IMAGE_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nfc/tensor.h"

namespace nfc {

inline constexpr double kPixelPeak = 255.0;
// Model space is pixel value minus this offset.
inline constexpr double kPixelOffset = 128.0;

// Planar (channel, row, column) image in pixel units. Values are not
// required to be integral or inside [0, 255].
struct Image {
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int64_t c, int64_t h, int64_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<size_t>(c * h * w), fill) {}

  double& at(int64_t c, int64_t y, int64_t x) { return data[(c * height + y) * width + x]; }
  double at(int64_t c, int64_t y, int64_t x) const { return data[(c * height + y) * width + x]; }
  int64_t pixels() const { return height * width; }
};

// Binary 8-bit PPM (P6). Writing rounds and clamps to [0, 255].
Image ReadPpm(const std::string& path);
void WritePpm(const std::string& path, const Image& image);
std::vector<uint8_t> EncodePpm(const Image& image);
Image DecodePpm(const std::vector<uint8_t>& bytes, const std::string& what);

// Sorted paths of the .ppm files in `dir`.
std::vector<std::string> ListImages(const std::string& dir);

// Symmetric reflection (edge sample repeated) up to the next multiple.
Image ReflectPad(const Image& image, int64_t multiple);
Image Crop(const Image& image, int64_t y, int64_t x, int64_t height, int64_t width);

// Stacks equally sized images into [N, C, H, W] model-space values.
template <typename T>
Tensor<T> ToModelSpace(const std::vector<Image>& images);
// Image `index` of a [N, C, H, W] model-space tensor.
template <typename T>
Image FromModelSpace(const Tensor<T>& x, int64_t index = 0);

double MeanSquaredError(const Image& a, const Image& b);
// 10 log10(peak^2 / mse), reported as 99 dB for identical images.
double Psnr(double mse, double peak = kPixelPeak);
double Psnr(const Image& a, const Image& b, double peak = kPixelPeak);

// Smooth gradients, sinusoidal texture, a few flat shapes and mild noise,
// quantized to 8 bits. Deterministic in `seed`.
Image SyntheticImage(int64_t height, int64_t width, uint64_t seed);
std::vector<Image> SyntheticCorpus(int count, int64_t height, int64_t width, uint64_t seed);

}  // namespace nfc

#endif  // NFC_IMAGE_H_

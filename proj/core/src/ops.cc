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

#include "nfc/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "nfc/error.h"

namespace nfc {
namespace {

using autograd::Node;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void RequireSameShape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw UsageError(std::string(op) + ": shape mismatch " + ShapeString(a) + " vs " +
                     ShapeString(b));
  }
}

void RequireRank4(const Shape& s, const char* op) {
  if (s.size() != 4) {
    throw UsageError(std::string(op) + ": expected NCHW tensor, got " + ShapeString(s));
  }
}

template <typename T>
T StableSigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T StableSoftplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

// dfdx(x, y) returns dy/dx given input x and output y.
template <typename T, typename F, typename D>
Tensor<T> Unary(const Tensor<T>& x, F f, D dfdx) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return MakeResult<T>(x.shape(), std::move(out), {x}, [dfdx](Node<T>& n) {
    auto gx = n.InputGrad(0);
    const auto& xv = n.inputs[0]->value;
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * dfdx(xv[i], n.value[i]);
  });
}

// Lays out the kh*kw shifted copies of each input channel as rows of a
// [Cin*kh*kw, H*W] matrix (zero outside the image).
template <typename T>
void Im2Col(const T* img, int64_t cin, int64_t h, int64_t w, int64_t kh, int64_t kw, T* col) {
  const int64_t ph = kh / 2, pw = kw / 2;
  for (int64_t c = 0; c < cin; ++c) {
    for (int64_t dy = 0; dy < kh; ++dy) {
      for (int64_t dx = 0; dx < kw; ++dx) {
        T* row = col + ((c * kh + dy) * kw + dx) * h * w;
        const int64_t oy = dy - ph, ox = dx - pw;
        for (int64_t y = 0; y < h; ++y) {
          const int64_t sy = y + oy;
          T* dst = row + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, T(0));
            continue;
          }
          const T* src = img + (c * h + sy) * w;
          const int64_t x0 = std::max<int64_t>(0, -ox);
          const int64_t x1 = std::min<int64_t>(w, w - ox);
          std::fill(dst, dst + x0, T(0));
          for (int64_t x = x0; x < x1; ++x) dst[x] = src[x + ox];
          std::fill(dst + std::max(x0, x1), dst + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void Col2ImAdd(const T* col, int64_t cin, int64_t h, int64_t w, int64_t kh, int64_t kw, T* img) {
  const int64_t ph = kh / 2, pw = kw / 2;
  for (int64_t c = 0; c < cin; ++c) {
    for (int64_t dy = 0; dy < kh; ++dy) {
      for (int64_t dx = 0; dx < kw; ++dx) {
        const T* row = col + ((c * kh + dy) * kw + dx) * h * w;
        const int64_t oy = dy - ph, ox = dx - pw;
        for (int64_t y = 0; y < h; ++y) {
          const int64_t sy = y + oy;
          if (sy < 0 || sy >= h) continue;
          const T* src = row + y * w;
          T* dst = img + (c * h + sy) * w;
          const int64_t x0 = std::max<int64_t>(0, -ox);
          const int64_t x1 = std::min<int64_t>(w, w - ox);
          for (int64_t x = x0; x < x1; ++x) dst[x + ox] += src[x];
        }
      }
    }
  }
}

int64_t PlaneSize(const Shape& s) {
  int64_t p = 1;
  for (size_t i = 2; i < s.size(); ++i) p *= s[i];
  return p;
}

}  // namespace

template <typename T>
Tensor<T> Conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
  RequireRank4(input.shape(), "conv2d input");
  RequireRank4(kernel.shape(), "conv2d kernel");
  const int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw UsageError("conv2d: input has " + std::to_string(cin) + " channels but kernel " +
                     ShapeString(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw UsageError("conv2d: kernel spatial extents must be odd, got " +
                     ShapeString(kernel.shape()));
  }
  if (bias.numel() != cout) {
    throw UsageError("conv2d: bias " + ShapeString(bias.shape()) + " does not match " +
                     std::to_string(cout) + " output channels");
  }
  const int64_t k = cin * kh * kw, p = h * w;
  const bool keep_cols = GradEnabled() && (input.requires_grad() || kernel.requires_grad() ||
                                           bias.requires_grad());
  std::vector<T> cols(static_cast<size_t>((keep_cols ? n : 1) * k * p));
  std::vector<T> out(static_cast<size_t>(n * cout * p));
  ConstMatMap<T> wm(kernel.data().data(), cout, k);
  const auto bv = bias.data();
  for (int64_t b = 0; b < n; ++b) {
    T* col = cols.data() + (keep_cols ? b * k * p : 0);
    Im2Col(input.data().data() + b * cin * p, cin, h, w, kh, kw, col);
    MatMap<T> om(out.data() + b * cout * p, cout, p);
    om.noalias() = wm * ConstMatMap<T>(col, k, p);
    for (int64_t o = 0; o < cout; ++o) om.row(o).array() += bv[o];
  }
  if (!keep_cols) cols.clear();

  return MakeResult<T>(
      {n, cout, h, w}, std::move(out), {input, kernel, bias},
      [cols = std::move(cols), n, cin, h, w, cout, kh, kw, k, p](Node<T>& node) {
        auto gx = node.InputGrad(0);
        auto gw = node.InputGrad(1);
        auto gb = node.InputGrad(2);
        ConstMatMap<T> wm(node.inputs[1]->value.data(), cout, k);
        std::vector<T> dcol(gx.empty() ? 0 : static_cast<size_t>(k * p));
        for (int64_t b = 0; b < n; ++b) {
          ConstMatMap<T> g(node.grad.data() + b * cout * p, cout, p);
          ConstMatMap<T> col(cols.data() + b * k * p, k, p);
          if (!gw.empty()) MatMap<T>(gw.data(), cout, k).noalias() += g * col.transpose();
          if (!gb.empty()) {
            for (int64_t o = 0; o < cout; ++o) gb[o] += g.row(o).sum();
          }
          if (!gx.empty()) {
            MatMap<T>(dcol.data(), k, p).noalias() = wm.transpose() * g;
            Col2ImAdd(dcol.data(), cin, h, w, kh, kw, gx.data() + b * cin * p);
          }
        }
      });
}

template <typename T>
Tensor<T> Add(const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a.shape(), b.shape(), "add");
  const auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    for (size_t j = 0; j < 2; ++j) {
      auto g = n.InputGrad(j);
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> Sub(const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a.shape(), b.shape(), "sub");
  const auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    auto ga = n.InputGrad(0);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
    auto gb = n.InputGrad(1);
    for (size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i];
  });
}

template <typename T>
Tensor<T> Mul(const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a.shape(), b.shape(), "mul");
  const auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    auto ga = n.InputGrad(0);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * bv[i];
    auto gb = n.InputGrad(1);
    for (size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * av[i];
  });
}

template <typename T>
Tensor<T> Div(const Tensor<T>& a, const Tensor<T>& b) {
  RequireSameShape(a.shape(), b.shape(), "div");
  const auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return MakeResult<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& n) {
    const auto& bv = n.inputs[1]->value;
    auto ga = n.InputGrad(0);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] / bv[i];
    auto gb = n.InputGrad(1);
    for (size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i] * n.value[i] / bv[i];
  });
}

template <typename T>
Tensor<T> Scale(const Tensor<T>& x, T factor) {
  return Unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> AddScalar(const Tensor<T>& x, T offset) {
  return Unary(x, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

namespace {

// Maps flat index i of x onto the broadcast operand: 0 for scalars,
// the channel for per-channel operands.
struct BroadcastIndex {
  int64_t channels = 1;
  int64_t plane = 1;
  bool scalar = true;
  int64_t operator()(int64_t i) const { return scalar ? 0 : (i / plane) % channels; }
};

template <typename T>
BroadcastIndex MakeBroadcast(const Tensor<T>& x, const Tensor<T>& b, const char* op) {
  BroadcastIndex bi;
  if (b.numel() == 1) return bi;
  if (x.rank() < 2 || b.rank() != 1 || b.dim(0) != x.dim(1)) {
    throw UsageError(std::string(op) + ": operand " + ShapeString(b.shape()) +
                     " is neither scalar nor per-channel for " + ShapeString(x.shape()));
  }
  bi.scalar = false;
  bi.channels = x.dim(1);
  bi.plane = PlaneSize(x.shape());
  return bi;
}

}  // namespace

template <typename T>
Tensor<T> AddBroadcast(const Tensor<T>& x, const Tensor<T>& b) {
  const BroadcastIndex bi = MakeBroadcast(x, b, "add_broadcast");
  const auto xv = x.data(), bv = b.data();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[bi(i)];
  return MakeResult<T>(x.shape(), std::move(out), {x, b}, [bi](Node<T>& n) {
    auto gx = n.InputGrad(0);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i];
    auto gb = n.InputGrad(1);
    if (!gb.empty()) {
      for (size_t i = 0; i < n.grad.size(); ++i) gb[bi(i)] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> MulBroadcast(const Tensor<T>& x, const Tensor<T>& b) {
  const BroadcastIndex bi = MakeBroadcast(x, b, "mul_broadcast");
  const auto xv = x.data(), bv = b.data();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * bv[bi(i)];
  return MakeResult<T>(x.shape(), std::move(out), {x, b}, [bi](Node<T>& n) {
    const auto& xv = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    auto gx = n.InputGrad(0);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * bv[bi(i)];
    auto gb = n.InputGrad(1);
    if (!gb.empty()) {
      for (size_t i = 0; i < n.grad.size(); ++i) gb[bi(i)] += n.grad[i] * xv[i];
    }
  });
}

template <typename T>
Tensor<T> Relu(const Tensor<T>& x) {
  return Unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> Tanh(const Tensor<T>& x) {
  return Unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> Sigmoid(const Tensor<T>& x) {
  return Unary(x, [](T v) { return StableSigmoid(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> Softplus(const Tensor<T>& x) {
  return Unary(x, [](T v) { return StableSoftplus(v); }, [](T v, T) { return StableSigmoid(v); });
}

template <typename T>
Tensor<T> Exp(const Tensor<T>& x) {
  return Unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> Log(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (!(v > T(0))) {
      throw NumericError("log of non-positive value " + std::to_string(static_cast<double>(v)));
    }
  }
  return Unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> Square(const Tensor<T>& x) {
  return Unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> Clamp(const Tensor<T>& x, T lo, T hi) {
  return Unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> Sum(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  return MakeResult<T>({1}, {s}, {x}, [](Node<T>& n) {
    auto g = n.InputGrad(0);
    for (auto& v : g) v += n.grad[0];
  });
}

template <typename T>
Tensor<T> Mean(const Tensor<T>& x) {
  return Scale(Sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> Sum(const Tensor<T>& x, const std::vector<int>& axes) {
  const Shape& in = x.shape();
  std::vector<bool> reduced(in.size(), false);
  for (int a : axes) {
    if (a < 0 || a >= static_cast<int>(in.size()) || reduced[a]) {
      throw UsageError("sum: invalid axis " + std::to_string(a) + " for " + ShapeString(in));
    }
    reduced[a] = true;
  }
  Shape out_shape;
  for (size_t i = 0; i < in.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(in[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  // Flat output index for every input element.
  std::vector<int64_t> target(static_cast<size_t>(x.numel()));
  std::vector<int64_t> idx(in.size(), 0);
  for (size_t i = 0; i < target.size(); ++i) {
    int64_t o = 0;
    for (size_t d = 0; d < in.size(); ++d) {
      if (!reduced[d]) o = o * in[d] + idx[d];
    }
    target[i] = o;
    for (int d = static_cast<int>(in.size()) - 1; d >= 0; --d) {
      if (++idx[d] < in[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<T> out(static_cast<size_t>(NumElements(out_shape)), T(0));
  const auto xv = x.data();
  for (size_t i = 0; i < xv.size(); ++i) out[target[i]] += xv[i];
  return MakeResult<T>(out_shape, std::move(out), {x},
                       [target = std::move(target)](Node<T>& n) {
                         auto g = n.InputGrad(0);
                         for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[target[i]];
                       });
}

template <typename T>
Tensor<T> Mean(const Tensor<T>& x, const std::vector<int>& axes) {
  Tensor<T> s = Sum(x, axes);
  return Scale(s, static_cast<T>(s.numel()) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> SliceChannels(const Tensor<T>& x, int64_t begin, int64_t end) {
  if (x.rank() < 2 || begin < 0 || end > x.dim(1) || begin >= end) {
    throw UsageError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + ShapeString(x.shape()));
  }
  std::vector<int> index;
  for (int64_t c = begin; c < end; ++c) index.push_back(static_cast<int>(c));
  return GatherChannels(x, index);
}

template <typename T>
Tensor<T> ConcatChannels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_channels: no inputs");
  Shape shape = parts[0].shape();
  if (shape.size() < 2) throw UsageError("concat_channels: rank must be >= 2");
  const int64_t n = shape[0], plane = PlaneSize(shape);
  int64_t channels = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size() || s[0] != n || PlaneSize(s) != plane) {
      throw UsageError("concat_channels: incompatible " + ShapeString(s) + " and " +
                       ShapeString(shape));
    }
    channels += s[1];
  }
  shape[1] = channels;
  std::vector<T> out(static_cast<size_t>(NumElements(shape)));
  std::vector<int64_t> offsets;
  int64_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const int64_t c = p.dim(1);
    const auto pv = p.data();
    for (int64_t b = 0; b < n; ++b) {
      std::copy(pv.begin() + b * c * plane, pv.begin() + (b + 1) * c * plane,
                out.begin() + (b * channels + offset) * plane);
    }
    offset += c;
  }
  return MakeResult<T>(shape, std::move(out), parts,
                       [offsets, n, channels, plane](Node<T>& node) {
                         for (size_t j = 0; j < node.inputs.size(); ++j) {
                           auto g = node.InputGrad(j);
                           if (g.empty()) continue;
                           const int64_t c = node.inputs[j]->shape[1];
                           for (int64_t b = 0; b < n; ++b) {
                             const T* src = node.grad.data() + (b * channels + offsets[j]) * plane;
                             T* dst = g.data() + b * c * plane;
                             for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                           }
                         }
                       });
}

template <typename T>
Tensor<T> GatherChannels(const Tensor<T>& x, const std::vector<int>& index) {
  if (x.rank() < 2) throw UsageError("gather_channels: rank must be >= 2");
  const int64_t n = x.dim(0), c = x.dim(1), plane = PlaneSize(x.shape());
  for (int i : index) {
    if (i < 0 || i >= c) {
      throw UsageError("gather_channels: index " + std::to_string(i) + " out of range for " +
                       ShapeString(x.shape()));
    }
  }
  const int64_t m = static_cast<int64_t>(index.size());
  Shape shape = x.shape();
  shape[1] = m;
  std::vector<T> out(static_cast<size_t>(n * m * plane));
  const auto xv = x.data();
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t o = 0; o < m; ++o) {
      const auto src = xv.begin() + (b * c + index[o]) * plane;
      std::copy(src, src + plane, out.begin() + (b * m + o) * plane);
    }
  }
  return MakeResult<T>(shape, std::move(out), {x}, [index, n, c, m, plane](Node<T>& node) {
    auto g = node.InputGrad(0);
    for (int64_t b = 0; b < n; ++b) {
      for (int64_t o = 0; o < m; ++o) {
        const T* src = node.grad.data() + (b * m + o) * plane;
        T* dst = g.data() + (b * c + index[o]) * plane;
        for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
    }
  });
}

namespace {

// Index of out[b, c*4 + 2*py + px, y, x] in the input [b, c, 2y+py, 2x+px].
std::vector<int64_t> SqueezeIndex(int64_t n, int64_t c, int64_t h, int64_t w) {
  const int64_t oh = h / 2, ow = w / 2;
  std::vector<int64_t> src(static_cast<size_t>(n * c * h * w));
  size_t o = 0;
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t py = 0; py < 2; ++py) {
        for (int64_t px = 0; px < 2; ++px) {
          for (int64_t y = 0; y < oh; ++y) {
            for (int64_t x = 0; x < ow; ++x) {
              src[o++] = ((b * c + ch) * h + 2 * y + py) * w + 2 * x + px;
            }
          }
        }
      }
    }
  }
  return src;
}

template <typename T>
Tensor<T> Permute(const Tensor<T>& x, Shape shape, std::vector<int64_t> src) {
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[src[i]];
  return MakeResult<T>(std::move(shape), std::move(out), {x},
                       [src = std::move(src)](Node<T>& node) {
                         auto g = node.InputGrad(0);
                         for (size_t i = 0; i < src.size(); ++i) g[src[i]] += node.grad[i];
                       });
}

}  // namespace

template <typename T>
Tensor<T> SpaceToDepth(const Tensor<T>& x) {
  RequireRank4(x.shape(), "space_to_depth");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) {
    throw UsageError("space_to_depth: spatial extents must be even, got " +
                     ShapeString(x.shape()));
  }
  return Permute(x, {n, 4 * c, h / 2, w / 2}, SqueezeIndex(n, c, h, w));
}

template <typename T>
Tensor<T> DepthToSpace(const Tensor<T>& x) {
  RequireRank4(x.shape(), "depth_to_space");
  const int64_t n = x.dim(0), c4 = x.dim(1), oh = x.dim(2), ow = x.dim(3);
  if (c4 % 4) {
    throw UsageError("depth_to_space: channels must be a multiple of 4, got " +
                     ShapeString(x.shape()));
  }
  const int64_t c = c4 / 4, h = 2 * oh, w = 2 * ow;
  const std::vector<int64_t> fwd = SqueezeIndex(n, c, h, w);
  std::vector<int64_t> inv(fwd.size());
  for (size_t i = 0; i < fwd.size(); ++i) inv[fwd[i]] = static_cast<int64_t>(i);
  return Permute(x, {n, c, h, w}, std::move(inv));
}

#define NFC_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> Conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> Add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> Sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> Mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> Div(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> Scale(const Tensor<T>&, T);                                            \
  template Tensor<T> AddScalar(const Tensor<T>&, T);                                        \
  template Tensor<T> AddBroadcast(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> MulBroadcast(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> Relu(const Tensor<T>&);                                                \
  template Tensor<T> Tanh(const Tensor<T>&);                                                \
  template Tensor<T> Sigmoid(const Tensor<T>&);                                             \
  template Tensor<T> Softplus(const Tensor<T>&);                                            \
  template Tensor<T> Exp(const Tensor<T>&);                                                 \
  template Tensor<T> Log(const Tensor<T>&);                                                 \
  template Tensor<T> Square(const Tensor<T>&);                                              \
  template Tensor<T> Clamp(const Tensor<T>&, T, T);                                         \
  template Tensor<T> Sum(const Tensor<T>&);                                                 \
  template Tensor<T> Mean(const Tensor<T>&);                                                \
  template Tensor<T> Sum(const Tensor<T>&, const std::vector<int>&);                        \
  template Tensor<T> Mean(const Tensor<T>&, const std::vector<int>&);                       \
  template Tensor<T> SliceChannels(const Tensor<T>&, int64_t, int64_t);                     \
  template Tensor<T> ConcatChannels(const std::vector<Tensor<T>>&);                         \
  template Tensor<T> GatherChannels(const Tensor<T>&, const std::vector<int>&);             \
  template Tensor<T> SpaceToDepth(const Tensor<T>&);                                        \
  template Tensor<T> DepthToSpace(const Tensor<T>&);

NFC_INSTANTIATE_OPS(float)
NFC_INSTANTIATE_OPS(double)

#undef NFC_INSTANTIATE_OPS

}  // namespace nfc

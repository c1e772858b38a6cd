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

// Differentiable primitives over Tensor<T>. Layout is NCHW throughout.
// Binary elementwise ops require identical shapes; the only broadcasts are
// a single-element operand and a per-channel operand (AddBroadcast,
// MulBroadcast).

#ifndef NFC_OPS_H_
#define NFC_OPS_H_

#include <cstdint>
#include <vector>

#include "nfc/tensor.h"

namespace nfc {

// Same-size cross-correlation with zero padding. kernel is
// [Cout, Cin, kh, kw] with odd kh and kw; bias is [Cout].
template <typename T>
Tensor<T> Conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias);

template <typename T> Tensor<T> Add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> AddScalar(const Tensor<T>& x, T offset);

// b has shape [1] or [C] where C = x.dim(1).
template <typename T> Tensor<T> AddBroadcast(const Tensor<T>& x, const Tensor<T>& b);
template <typename T> Tensor<T> MulBroadcast(const Tensor<T>& x, const Tensor<T>& b);

template <typename T> Tensor<T> Relu(const Tensor<T>& x);
template <typename T> Tensor<T> Tanh(const Tensor<T>& x);
template <typename T> Tensor<T> Sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> Softplus(const Tensor<T>& x);
template <typename T> Tensor<T> Exp(const Tensor<T>& x);
// Throws on non-positive input.
template <typename T> Tensor<T> Log(const Tensor<T>& x);
template <typename T> Tensor<T> Square(const Tensor<T>& x);
// Gradient passes only where lo <= x <= hi.
template <typename T> Tensor<T> Clamp(const Tensor<T>& x, T lo, T hi);

template <typename T> Tensor<T> Sum(const Tensor<T>& x);
template <typename T> Tensor<T> Mean(const Tensor<T>& x);
// Reduces the listed axes away; reducing every axis yields shape [1].
template <typename T> Tensor<T> Sum(const Tensor<T>& x, const std::vector<int>& axes);
template <typename T> Tensor<T> Mean(const Tensor<T>& x, const std::vector<int>& axes);

// Channel bookkeeping on NCHW tensors.
template <typename T>
Tensor<T> SliceChannels(const Tensor<T>& x, int64_t begin, int64_t end);
template <typename T>
Tensor<T> ConcatChannels(const std::vector<Tensor<T>>& parts);
// out[:, i] = x[:, index[i]]; index must be a permutation of the channels or
// a subset of them.
template <typename T>
Tensor<T> GatherChannels(const Tensor<T>& x, const std::vector<int>& index);

// Space-to-depth by 2: output channel c*4 + 2*(row parity) + (col parity).
template <typename T> Tensor<T> SpaceToDepth(const Tensor<T>& x);
template <typename T> Tensor<T> DepthToSpace(const Tensor<T>& x);

}  // namespace nfc

#endif  // NFC_OPS_H_

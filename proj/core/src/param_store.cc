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

#include "nfc/param_store.h"

#include <fstream>
#include <iterator>

#include "nfc/bytes.h"
#include "nfc/error.h"

namespace nfc {

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::string& path, std::span<const uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("write to '" + path + "' failed");
}

template <typename T>
Tensor<T> ParamStore<T>::Add(const std::string& name, Tensor<T> value) {
  if (Has(name)) throw UsageError("duplicate parameter name '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back(Entry{name, value, {}, {}});
  return value;
}

template <typename T>
const Tensor<T>& ParamStore<T>::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw FormatError("missing parameter '" + name + "'");
  return entries_[it->second].value;
}

template <typename T>
int64_t ParamStore<T>::NumScalars() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
void ParamStore<T>::ZeroGrad() {
  for (auto& e : entries_) e.value.ZeroGrad();
}

template <typename T>
void ParamStore<T>::SetRequiresGrad(bool on) {
  for (auto& e : entries_) e.value.set_requires_grad(on);
}

template <typename T>
std::vector<uint8_t> ParamStore<T>::Serialize(DType dtype) const {
  ByteWriter w;
  w.Text("NDG1");
  w.U32(static_cast<uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.U32(static_cast<uint32_t>(e.name.size()));
    w.Text(e.name);
    w.U8(static_cast<uint8_t>(dtype));
    w.U8(static_cast<uint8_t>(e.value.rank()));
    for (int64_t d : e.value.shape()) w.I64(d);
    for (T v : e.value.data()) {
      if (dtype == DType::kF32) {
        w.F32(static_cast<float>(v));
      } else {
        w.F64(static_cast<double>(v));
      }
    }
  }
  return w.Take();
}

template <typename T>
ParamStore<T> ParamStore<T>::Deserialize(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, "parameter store");
  r.ExpectMagic("NDG1");
  const uint32_t count = r.U32();
  ParamStore out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.U32();
    if (name_len > r.remaining()) throw FormatError("parameter store: name length out of range");
    std::string name = r.Text(name_len);
    const uint8_t dtype = r.U8();
    if (dtype != static_cast<uint8_t>(DType::kF32) && dtype != static_cast<uint8_t>(DType::kF64)) {
      throw FormatError("parameter store: unknown dtype code " + std::to_string(dtype));
    }
    const uint8_t rank = r.U8();
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.I64();
      if (d < 1 || d > (int64_t{1} << 32)) throw FormatError("parameter store: bad extent");
    }
    const int64_t n = NumElements(shape);
    const size_t width = dtype == static_cast<uint8_t>(DType::kF32) ? 4 : 8;
    if (static_cast<uint64_t>(n) * width > r.remaining()) {
      throw FormatError("parameter store: entry '" + name + "' is truncated");
    }
    std::vector<T> values(static_cast<size_t>(n));
    for (auto& v : values) {
      v = dtype == static_cast<uint8_t>(DType::kF32) ? static_cast<T>(r.F32())
                                                     : static_cast<T>(r.F64());
    }
    out.Add(name, Tensor<T>(shape, std::move(values), true));
  }
  if (r.remaining() != 0) throw FormatError("parameter store: trailing bytes");
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace nfc

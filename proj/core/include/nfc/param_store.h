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

// Named parameter tensors plus per-parameter optimizer moments.
//
// Binary layout (little-endian): "NDG1", u32 entry count, then per entry
// u32 name length, name bytes, u8 dtype (1 = f32, 2 = f64), u8 rank,
// i64 extents, raw elements.

#ifndef NFC_PARAM_STORE_H_
#define NFC_PARAM_STORE_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nfc/tensor.h"

namespace nfc {

enum class DType : uint8_t { kF32 = 1, kF64 = 2 };

template <typename T>
constexpr DType NativeDType() {
  return sizeof(T) == 4 ? DType::kF32 : DType::kF64;
}

template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    // Optimizer moments, lazily sized by the optimizer.
    std::vector<T> first_moment;
    std::vector<T> second_moment;
  };

  // Registers a trainable leaf. Names must be unique.
  Tensor<T> Add(const std::string& name, Tensor<T> value);
  const Tensor<T>& Get(const std::string& name) const;
  bool Has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  int64_t NumScalars() const;

  void ZeroGrad();
  void SetRequiresGrad(bool on);

  std::vector<uint8_t> Serialize(DType dtype = NativeDType<T>()) const;
  static ParamStore Deserialize(std::span<const uint8_t> bytes);

  template <typename U>
  ParamStore<U> Cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) {
      Tensor<U> t = e.value.template Cast<U>();
      t.set_requires_grad(e.value.requires_grad());
      out.Add(e.name, t);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace nfc

#endif  // NFC_PARAM_STORE_H_

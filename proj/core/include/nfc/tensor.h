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

// Dense NCHW tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node. Operations whose inputs
// require gradients record their inputs and a backward closure on the result,
// so the tape is the set of nodes reachable from a loss. Backward() replays
// that set in reverse creation order, visiting every node exactly once.

#ifndef NFC_TENSOR_H_
#define NFC_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nfc {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

namespace autograd {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // Sized lazily for interior nodes.
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }

  // Gradient buffer of input `i`, allocated on first use. Empty when that
  // input does not participate in differentiation.
  std::span<T> InputGrad(size_t i);
};

uint64_t NextSequence();

}  // namespace autograd

template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor Constant(T value) { return Tensor(Shape{1}, value); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim(size_t axis) const { return node_->shape.at(axis); }
  size_t rank() const { return node_->shape.size(); }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

  std::span<const T> data() const { return node_->value; }
  // Writable access is intended for leaves (parameters, inputs) only.
  std::span<T> mutable_data() { return node_->value; }
  T item() const;
  T at(int64_t flat_index) const { return node_->value[flat_index]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on);

  // Accumulated gradient; zeros if nothing has flowed here yet.
  std::span<const T> grad() const;
  void ZeroGrad();

  // Same values, cut off from the tape.
  Tensor Detach() const;
  Tensor Clone() const;

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires
  // gradients. `this` must be a scalar on the tape.
  void Backward() const;

  // Rebinds this handle to the same values converted to U.
  template <typename U>
  Tensor<U> Cast() const {
    std::vector<U> out(node_->value.begin(), node_->value.end());
    return Tensor<U>(node_->shape, std::move(out), requires_grad());
  }

  const std::shared_ptr<autograd::Node<T>>& node() const { return node_; }
  static Tensor FromNode(std::shared_ptr<autograd::Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<autograd::Node<T>> node_;
};

// Builds the result of a primitive. When any input requires gradients the
// result joins the tape with `backward`, which reads node.grad and adds into
// node.InputGrad(i).
// True unless a NoGradGuard is alive on this thread.
bool GradEnabled();

// Stops recording operations on the tape for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
Tensor<T> MakeResult(Shape shape, std::vector<T> value,
                     const std::vector<Tensor<T>>& inputs,
                     std::function<void(autograd::Node<T>&)> backward);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace nfc

#endif  // NFC_TENSOR_H_

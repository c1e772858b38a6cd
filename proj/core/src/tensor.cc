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

#include "nfc/tensor.h"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "nfc/error.h"

namespace nfc {

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace autograd {

uint64_t NextSequence() {
  static std::atomic<uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed) + 1;
}

template <typename T>
std::span<T> Node<T>::InputGrad(size_t i) {
  Node& in = *inputs[i];
  if (!in.requires_grad) return {};
  if (in.grad.size() != in.value.size()) in.grad.assign(in.value.size(), T(0));
  return in.grad;
}

template struct Node<float>;
template struct Node<double>;

}  // namespace autograd

namespace {

void CheckShape(const Shape& shape, size_t count) {
  if (shape.empty()) throw UsageError("tensor shape must have rank >= 1");
  for (int64_t d : shape) {
    if (d < 1) throw UsageError("tensor extents must be >= 1, got " + ShapeString(shape));
  }
  if (static_cast<size_t>(NumElements(shape)) != count) {
    throw UsageError("element count " + std::to_string(count) +
                     " does not match shape " + ShapeString(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad) {
  const int64_t n = NumElements(shape);
  CheckShape(shape, static_cast<size_t>(n));
  node_ = std::make_shared<autograd::Node<T>>();
  node_->shape = std::move(shape);
  node_->value.assign(static_cast<size_t>(n), fill);
  node_->seq = autograd::NextSequence();
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  CheckShape(shape, values.size());
  node_ = std::make_shared<autograd::Node<T>>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->seq = autograd::NextSequence();
  set_requires_grad(requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw UsageError("item() needs a single-element tensor, got " + ShapeString(shape()));
  }
  return node_->value[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on && node_->is_leaf()) {
    node_->grad.assign(node_->value.size(), T(0));
  } else if (!on) {
    node_->grad.clear();
  }
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (node_->grad.size() != node_->value.size()) {
    node_->grad.assign(node_->value.size(), T(0));
  }
  return node_->grad;
}

template <typename T>
void Tensor<T>::ZeroGrad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::Detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <typename T>
Tensor<T> Tensor<T>::Clone() const {
  return Tensor(node_->shape, node_->value, requires_grad());
}

template <typename T>
void Tensor<T>::Backward() const {
  if (!node_ || numel() != 1) {
    throw UsageError("Backward() needs a scalar loss, got " +
                     (node_ ? ShapeString(shape()) : std::string("undefined")));
  }
  if (!node_->requires_grad || node_->is_leaf()) {
    throw UsageError("Backward() called on a tensor that is not on the tape");
  }

  using NodeT = autograd::Node<T>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<NodeT*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    NodeT* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const NodeT* a, const NodeT* b) { return a->seq > b->seq; });

  for (NodeT* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), T(0));
  }
  node_->grad[0] = T(1);
  for (NodeT* n : order) {
    if (!n->is_leaf()) n->backward(*n);
  }
}

namespace {
thread_local bool grad_enabled = true;
}  // namespace

bool GradEnabled() { return grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }

NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

template <typename T>
Tensor<T> MakeResult(Shape shape, std::vector<T> value,
                     const std::vector<Tensor<T>>& inputs,
                     std::function<void(autograd::Node<T>&)> backward) {
  auto node = std::make_shared<autograd::Node<T>>();
  CheckShape(shape, value.size());
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any && grad_enabled) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  node->seq = autograd::NextSequence();
  return Tensor<T>::FromNode(std::move(node));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> MakeResult(Shape, std::vector<float>, const std::vector<Tensor<float>>&,
                                  std::function<void(autograd::Node<float>&)>);
template Tensor<double> MakeResult(Shape, std::vector<double>,
                                   const std::vector<Tensor<double>>&,
                                   std::function<void(autograd::Node<double>&)>);

}  // namespace nfc

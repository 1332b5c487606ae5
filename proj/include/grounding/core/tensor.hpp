#pragma once

#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "grounding/core/shape.hpp"

namespace grounding {

// Tensors run in double for gradient checks and in float for training.
template <typename T>
concept Real = std::same_as<T, float> || std::same_as<T, double>;

template <Real T>
struct Node;

template <Real T>
struct TensorImpl {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // same size as values iff requires_grad
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;  // null for leaves
};

// One recorded operation. `backward` reads the output's grad and adds into
// the grads of `inputs`.
template <Real T>
struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(const TensorImpl<T>& output)> backward;
};

// Shared handle to an n-dimensional row-major array.
//
// Copies alias the same storage. Values are fixed once an operation has
// produced them; only leaves (parameters) may be written through
// `mutable_values()`, and only the grad slot changes during backward.
template <Real T>
class Tensor {
 public:
  using value_type = T;

  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->values.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }

  std::span<const T> values() const { return impl_->values; }
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->node == nullptr; }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad; }
  void zero_grad();

  // Same values, no history, no grad slot.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl);

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Topologically ordered view of everything that contributed to a tensor.
// Inputs precede the nodes that consume them; each tensor appears once.
template <Real T>
struct ComputeGraph {
  std::vector<std::shared_ptr<TensorImpl<T>>> order;

  std::size_t size() const { return order.size(); }
};

template <Real T>
ComputeGraph<T> trace(const Tensor<T>& root);

// Accumulates d(loss)/d(t) into every requires_grad tensor reached from
// `loss`. Gradients add to whatever is already in the grad slots.
template <Real T>
void backward(const Tensor<T>& loss);

template <Real T>
void backward(const Tensor<T>& loss, const ComputeGraph<T>& graph);

namespace detail {

// Builds an op result: checks finiteness, and records a node when any input
// requires grad and recording is enabled.
template <Real T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(const TensorImpl<T>&)> backward);

}  // namespace detail

}  // namespace grounding

#include "grounding/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "grounding/core/errors.hpp"

namespace grounding {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <Real T>
Tensor<T>::Tensor() : impl_(std::make_shared<TensorImpl<T>>()) {
  impl_->values.assign(1, T{0});
}

template <Real T>
Tensor<T>::Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

template <Real T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <Real T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> values(grounding::numel(shape), value);
  return from(std::move(shape), std::move(values), requires_grad);
}

template <Real T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values,
                          bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero-sized dimension in " + to_string(shape));
  }
  if (grounding::numel(shape) != values.size()) {
    throw ShapeError("shape " + to_string(shape) + " needs " +
                     std::to_string(grounding::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->values.size(), T{0});
  return Tensor(std::move(impl));
}

template <Real T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

template <Real T>
std::span<T> Tensor<T>::mutable_values() {
  if (!is_leaf()) {
    throw ValidationError("values of an op result are immutable");
  }
  return impl_->values;
}

template <Real T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  }
  return impl_->values[0];
}

template <Real T>
void Tensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T{0});
}

template <Real T>
Tensor<T> Tensor<T>::detach() const {
  return from(impl_->shape, impl_->values, false);
}

template <Real T>
ComputeGraph<T> trace(const Tensor<T>& root) {
  ComputeGraph<T> graph;
  if (!root.requires_grad()) return graph;

  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<const TensorImpl<T>*> visited;
  std::vector<std::pair<std::shared_ptr<TensorImpl<T>>, std::size_t>> stack;
  stack.emplace_back(root.impl(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto* node = impl->node.get();
    if (node != nullptr && next < node->inputs.size()) {
      const auto& input = node->inputs[next++];
      if (input->requires_grad && visited.insert(input.get()).second) {
        stack.emplace_back(input, 0);
      }
      continue;
    }
    graph.order.push_back(impl);
    stack.pop_back();
  }
  return graph;
}

template <Real T>
void backward(const Tensor<T>& loss) {
  backward(loss, trace(loss));
}

template <Real T>
void backward(const Tensor<T>& loss, const ComputeGraph<T>& graph) {
  if (loss.numel() != 1) {
    throw ValidationError("backward needs a scalar loss, got shape " +
                          to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  if (graph.order.empty() || graph.order.back() != loss.impl()) {
    throw ValidationError("graph was not traced from this loss");
  }

  // Intermediate grads start from zero for each backward call; leaves keep
  // accumulating across calls.
  for (const auto& impl : graph.order) {
    if (impl->node) std::fill(impl->grad.begin(), impl->grad.end(), T{0});
  }
  loss.impl()->grad[0] += T{1};
  for (auto it = graph.order.rbegin(); it != graph.order.rend(); ++it) {
    const auto& impl = *it;
    if (impl->node) impl->node->backward(*impl);
  }
}

namespace detail {

template <Real T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(const TensorImpl<T>&)> backward_fn) {
  for (const T v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);

  const bool record =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor<T>& t) {
                                      return t.requires_grad();
                                    });
  if (record) {
    impl->requires_grad = true;
    impl->grad.assign(impl->values.size(), T{0});
    auto node = std::make_shared<Node<T>>();
    node->op = op;
    for (auto& input : inputs) node->inputs.push_back(input.impl());
    node->backward = std::move(backward_fn);
    impl->node = std::move(node);
  }
  return Tensor<T>(std::move(impl));
}

template Tensor<float> make_result(const char*, Shape, std::vector<float>,
                                   std::vector<Tensor<float>>,
                                   std::function<void(const TensorImpl<float>&)>);
template Tensor<double> make_result(
    const char*, Shape, std::vector<double>, std::vector<Tensor<double>>,
    std::function<void(const TensorImpl<double>&)>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;
template ComputeGraph<float> trace(const Tensor<float>&);
template ComputeGraph<double> trace(const Tensor<double>&);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template void backward(const Tensor<float>&, const ComputeGraph<float>&);
template void backward(const Tensor<double>&, const ComputeGraph<double>&);

}  // namespace grounding

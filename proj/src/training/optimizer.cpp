#include "grounding/training/optimizer.hpp"

#include <cmath>

#include "grounding/core/errors.hpp"

namespace grounding {

template <Real T>
double clip_global_norm(std::span<Tensor<T>> params, double max_norm) {
  if (!(max_norm > 0.0)) throw ValidationError("clip norm must be positive");
  double squared = 0.0;
  for (const auto& p : params) {
    for (const T g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient before clipping");
      squared += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  const double norm = std::sqrt(squared);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      for (T& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

template <Real T>
AdamState<T> AdamState<T>::zeros_like(std::span<const Tensor<T>> params) {
  AdamState<T> state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), T{0});
    state.second_moment.emplace_back(p.numel(), T{0});
  }
  return state;
}

template <Real T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, double lr) {
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer state does not match parameter count");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(state.beta1, t);
  const double correct2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != values.size() || v.size() != values.size()) {
      throw ShapeError("optimizer moment size mismatch for parameter " +
                       std::to_string(i));
    }
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = static_cast<T>(state.beta1 * m[j] + (1.0 - state.beta1) * g);
      v[j] = static_cast<T>(state.beta2 * v[j] + (1.0 - state.beta2) * g * g);
      const double update =
          lr * (m[j] / correct1) / (std::sqrt(v[j] / correct2) + state.eps);
      const T next = static_cast<T>(values[j] - update);
      if (!std::isfinite(next)) throw NumericError("non-finite Adam update");
      values[j] = next;
    }
  }
}

template double clip_global_norm(std::span<Tensor<float>>, double);
template double clip_global_norm(std::span<Tensor<double>>, double);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Tensor<float>>, AdamState<float>&, double);
template void adam_step(std::span<Tensor<double>>, AdamState<double>&, double);

}  // namespace grounding

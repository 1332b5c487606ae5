#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grounding/core/parameters.hpp"
#include "grounding/core/tensor.hpp"

namespace grounding {

// Scales every gradient by max_norm / g when the global L2 norm g over all
// of them exceeds max_norm. Returns g (before clipping). Throws NumericError
// on a non-finite gradient.
template <Real T>
double clip_global_norm(std::span<Tensor<T>> params, double max_norm);

// Adam with bias correction, no weight decay.
template <Real T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  static AdamState zeros_like(std::span<const Tensor<T>> params);
};

template <Real T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, double lr);

}  // namespace grounding

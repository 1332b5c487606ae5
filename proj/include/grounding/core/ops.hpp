#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "grounding/core/rng.hpp"
#include "grounding/core/tensor.hpp"

namespace grounding {

// Boolean mask broadcastable against a tensor; nonzero marks a valid entry.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> valid;

  static Mask all(Shape shape);
};

// Elementwise ops broadcast numpy-style.
template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <Real T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <Real T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <Real T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <Real T>
Tensor<T> gelu(const Tensor<T>& x);

// [..., m, k] x [..., k, n] -> [..., m, n]; batch axes broadcast.
template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <Real T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
// Output axis i is input axis axes[i].
template <Real T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <Real T>
Tensor<T> transpose_last2(const Tensor<T>& x);

// Rows of a [n, d] table, in the order given. Throws ValidationError on an
// out-of-range index.
template <Real T>
Tensor<T> gather_rows(const Tensor<T>& table,
                      std::span<const std::size_t> rows);

// Softmax over the last axis. Masked entries get exactly zero probability;
// a row with no valid entry is an error.
template <Real T>
Tensor<T> softmax_lastdim(const Tensor<T>& x,
                          const std::optional<Mask>& mask = std::nullopt);

// Normalizes over the last axis, then applies gain and bias.
template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps);

// Identity unless training with p > 0; then each entry is zeroed with
// probability p and survivors are scaled by 1/(1-p). Draws one uniform per
// entry in row-major order.
template <Real T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng* rng);

// Per-element max(z,0) - z*t + log(1+exp(-|z|)), zero where masked.
// Targets must be 0 or 1 wherever the mask is set.
template <Real T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets,
                          const Mask& mask);

template <Real T>
Tensor<T> sum(const Tensor<T>& x);
template <Real T>
Tensor<T> mean(const Tensor<T>& x);

}  // namespace grounding

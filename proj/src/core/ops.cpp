#include "grounding/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "grounding/core/errors.hpp"

namespace grounding {

using detail::make_result;

Mask Mask::all(Shape shape) {
  Mask mask;
  mask.valid.assign(numel(shape), 1);
  mask.shape = std::move(shape);
  return mask;
}

namespace {

// Broadcast map, or empty when `in` already has the output shape.
std::vector<std::size_t> plan(const Shape& out, const Shape& in) {
  if (in == out) return {};
  return broadcast_index_map(out, in);
}

inline std::size_t source(const std::vector<std::size_t>& map, std::size_t i) {
  return map.empty() ? i : map[i];
}

template <Real T>
void check_mask(const Mask& mask) {
  if (mask.valid.size() != numel(mask.shape)) {
    throw ShapeError("mask shape " + to_string(mask.shape) +
                     " does not match its " +
                     std::to_string(mask.valid.size()) + " entries");
  }
}

}  // namespace

template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  auto ma = plan(out, a.shape());
  auto mb = plan(out, b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> values(numel(out));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = av[source(ma, i)] + bv[source(mb, i)];
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<T>(
      "add", std::move(out), std::move(values), {a, b},
      [ai, bi, ma = std::move(ma), mb = std::move(mb)](const TensorImpl<T>& o) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          if (ai->requires_grad) ai->grad[source(ma, i)] += o.grad[i];
          if (bi->requires_grad) bi->grad[source(mb, i)] += o.grad[i];
        }
      });
}

template <Real T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  auto ma = plan(out, a.shape());
  auto mb = plan(out, b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> values(numel(out));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = av[source(ma, i)] - bv[source(mb, i)];
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<T>(
      "sub", std::move(out), std::move(values), {a, b},
      [ai, bi, ma = std::move(ma), mb = std::move(mb)](const TensorImpl<T>& o) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          if (ai->requires_grad) ai->grad[source(ma, i)] += o.grad[i];
          if (bi->requires_grad) bi->grad[source(mb, i)] -= o.grad[i];
        }
      });
}

template <Real T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  auto ma = plan(out, a.shape());
  auto mb = plan(out, b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> values(numel(out));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = av[source(ma, i)] * bv[source(mb, i)];
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<T>(
      "mul", std::move(out), std::move(values), {a, b},
      [ai, bi, ma = std::move(ma), mb = std::move(mb)](const TensorImpl<T>& o) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          const std::size_t ia = source(ma, i);
          const std::size_t ib = source(mb, i);
          if (ai->requires_grad) ai->grad[ia] += o.grad[i] * bi->values[ib];
          if (bi->requires_grad) bi->grad[ib] += o.grad[i] * ai->values[ia];
        }
      });
}

template <Real T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> values(x.values().begin(), x.values().end());
  for (T& v : values) v *= factor;
  auto xi = x.impl();
  return make_result<T>("scale", x.shape(), std::move(values), {x},
                        [xi, factor](const TensorImpl<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            xi->grad[i] += o.grad[i] * factor;
                          }
                        });
}

template <Real T>
Tensor<T> gelu(const Tensor<T>& x) {
  // Exact form 0.5 x (1 + erf(x / sqrt 2)).
  const auto xv = x.values();
  std::vector<T> values(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    values[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] / std::numbers::sqrt2_v<T>));
  }
  auto xi = x.impl();
  return make_result<T>(
      "gelu", x.shape(), std::move(values), {x}, [xi](const TensorImpl<T>& o) {
        const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          const T v = xi->values[i];
          const T cdf = T(0.5) * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
          const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
          xi->grad[i] += o.grad[i] * (cdf + v * pdf);
        }
      });
}

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto mismatch = [&] {
    return ShapeError("matmul shape mismatch: " + to_string(a.shape()) +
                      " x " + to_string(b.shape()));
  };
  if (a.rank() < 2 || b.rank() < 2) throw mismatch();
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape()[a.rank() - 1];
  const std::size_t n = b.shape()[b.rank() - 1];
  if (b.shape()[b.rank() - 2] != k) throw mismatch();

  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  try {
    batch = broadcast_shapes(batch_a, batch_b);
  } catch (const ShapeError&) {
    throw mismatch();
  }
  auto ma = plan(batch, batch_a);
  auto mb = plan(batch, batch_b);
  const std::size_t batches = numel(batch);

  Shape out = batch;
  out.push_back(m);
  out.push_back(n);
  std::vector<T> values(batches * m * n, T{0});
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t t = 0; t < batches; ++t) {
    const T* pa = av.data() + source(ma, t) * m * k;
    const T* pb = bv.data() + source(mb, t) * k * n;
    T* pc = values.data() + t * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = pa[i * k + p];
        for (std::size_t j = 0; j < n; ++j) pc[i * n + j] += aip * pb[p * n + j];
      }
    }
  }

  auto ai = a.impl();
  auto bi = b.impl();
  return make_result<T>(
      "matmul", std::move(out), std::move(values), {a, b},
      [ai, bi, ma = std::move(ma), mb = std::move(mb), batches, m, k,
       n](const TensorImpl<T>& o) {
        for (std::size_t t = 0; t < batches; ++t) {
          const std::size_t oa = source(ma, t) * m * k;
          const std::size_t ob = source(mb, t) * k * n;
          const T* g = o.grad.data() + t * m * n;
          if (ai->requires_grad) {
            // dA = dC . B^T
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                T acc{0};
                for (std::size_t j = 0; j < n; ++j) {
                  acc += g[i * n + j] * bi->values[ob + p * n + j];
                }
                ai->grad[oa + i * k + p] += acc;
              }
            }
          }
          if (bi->requires_grad) {
            // dB = A^T . dC
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const T aip = ai->values[oa + i * k + p];
                for (std::size_t j = 0; j < n; ++j) {
                  bi->grad[ob + p * n + j] += aip * g[i * n + j];
                }
              }
            }
          }
        }
      });
}

template <Real T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " +
                     to_string(shape));
  }
  std::vector<T> values(x.values().begin(), x.values().end());
  auto xi = x.impl();
  return make_result<T>("reshape", std::move(shape), std::move(values), {x},
                        [xi](const TensorImpl<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            xi->grad[i] += o.grad[i];
                          }
                        });
}

template <Real T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const std::size_t rank = x.rank();
  std::vector<bool> seen(rank, false);
  if (axes.size() != rank) {
    throw ShapeError("permute of " + to_string(x.shape()) + " needs " +
                     std::to_string(rank) + " axes");
  }
  for (std::size_t axis : axes) {
    if (axis >= rank || seen[axis]) {
      throw ShapeError("invalid axis permutation for " + to_string(x.shape()));
    }
    seen[axis] = true;
  }

  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) {
    in_strides[i - 1] = in_strides[i] * x.shape()[i];
  }
  Shape out(rank);
  std::vector<std::size_t> strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out[i] = x.shape()[axes[i]];
    strides[i] = in_strides[axes[i]];
  }

  // Walk the output in row-major order, tracking the matching input offset.
  const std::size_t total = x.numel();
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> index(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    map[flat] = src;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++index[axis];
      src += strides[axis];
      if (index[axis] < out[axis]) break;
      src -= strides[axis] * index[axis];
      index[axis] = 0;
    }
  }

  const auto xv = x.values();
  std::vector<T> values(total);
  for (std::size_t i = 0; i < total; ++i) values[i] = xv[map[i]];
  auto xi = x.impl();
  return make_result<T>("permute", std::move(out), std::move(values), {x},
                        [xi, map = std::move(map)](const TensorImpl<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            xi->grad[map[i]] += o.grad[i];
                          }
                        });
}

template <Real T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  if (x.rank() < 2) {
    throw ShapeError("transpose_last2 needs rank >= 2, got " +
                     to_string(x.shape()));
  }
  std::vector<std::size_t> axes(x.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(x, axes);
}

template <Real T>
Tensor<T> gather_rows(const Tensor<T>& table,
                      std::span<const std::size_t> rows) {
  if (table.rank() != 2) {
    throw ShapeError("gather_rows needs a [n, d] table, got " +
                     to_string(table.shape()));
  }
  if (rows.empty()) throw ShapeError("gather_rows with no indices");
  const std::size_t n = table.dim(0);
  const std::size_t d = table.dim(1);
  const auto tv = table.values();
  std::vector<T> values(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ValidationError("row index " + std::to_string(rows[r]) +
                            " out of range for table of " + std::to_string(n) +
                            " rows");
    }
    std::copy_n(tv.begin() + rows[r] * d, d, values.begin() + r * d);
  }
  auto ti = table.impl();
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return make_result<T>("gather_rows", {rows.size(), d}, std::move(values),
                        {table},
                        [ti, index = std::move(index), d](const TensorImpl<T>& o) {
                          for (std::size_t r = 0; r < index.size(); ++r) {
                            for (std::size_t j = 0; j < d; ++j) {
                              ti->grad[index[r] * d + j] += o.grad[r * d + j];
                            }
                          }
                        });
}

template <Real T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, const std::optional<Mask>& mask) {
  if (x.rank() == 0) throw ShapeError("softmax_lastdim on a scalar");
  std::vector<std::size_t> mmap;
  if (mask) {
    check_mask<T>(*mask);
    mmap = broadcast_index_map(x.shape(), mask->shape);
  }
  const auto valid = [&](std::size_t i) {
    return !mask || mask->valid[mmap[i]] != 0;
  };

  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto xv = x.values();
  std::vector<T> values(x.numel(), T{0});
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    T max = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (valid(base + j)) max = std::max(max, xv[base + j]);
    }
    if (max == -std::numeric_limits<T>::infinity()) {
      throw ValidationError("softmax row " + std::to_string(r) +
                            " is fully masked");
    }
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
      if (!valid(base + j)) continue;
      values[base + j] = std::exp(xv[base + j] - max);
      total += values[base + j];
    }
    for (std::size_t j = 0; j < n; ++j) values[base + j] /= total;
  }

  auto xi = x.impl();
  return make_result<T>(
      "softmax_lastdim", x.shape(), std::move(values), {x},
      [xi, n, rows](const TensorImpl<T>& o) {
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * n;
          T dot{0};
          for (std::size_t j = 0; j < n; ++j) {
            dot += o.grad[base + j] * o.values[base + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            xi->grad[base + j] += o.values[base + j] * (o.grad[base + j] - dot);
          }
        }
      });
}

template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm on a scalar");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm gain " + to_string(gain.shape()) +
                     " / bias " + to_string(bias.shape()) +
                     " must match last dimension of " + to_string(x.shape()));
  }
  if (!(eps >= T{0})) throw ValidationError("layer_norm eps must be >= 0");

  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<T> normalized(x.numel());
  std::vector<T> inv_std(rows);
  std::vector<T> values(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu{0};
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    inv_std[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * inv_std[r];
      normalized[r * d + j] = h;
      values[r * d + j] = h * gv[j] + bv[j];
    }
  }

  auto xi = x.impl();
  auto gi = gain.impl();
  auto bi = bias.impl();
  return make_result<T>(
      "layer_norm", x.shape(), std::move(values), {x, gain, bias},
      [xi, gi, bi, d, rows, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](const TensorImpl<T>& o) {
        std::vector<T> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = o.grad.data() + r * d;
          const T* h = normalized.data() + r * d;
          T mean_dh{0};
          T mean_dh_h{0};
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = g[j] * gi->values[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * h[j];
            if (gi->requires_grad) gi->grad[j] += g[j] * h[j];
            if (bi->requires_grad) bi->grad[j] += g[j];
          }
          if (!xi->requires_grad) continue;
          mean_dh /= static_cast<T>(d);
          mean_dh_h /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            xi->grad[r * d + j] +=
                inv_std[r] * (dh[j] - mean_dh - h[j] * mean_dh_h);
          }
        }
      });
}

template <Real T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ValidationError("dropout probability must lie in [0, 1), got " +
                          std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw ValidationError("training dropout needs an rng");

  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> factors(x.numel());
  for (T& f : factors) f = rng->uniform() < p ? T{0} : keep_scale;
  const auto xv = x.values();
  std::vector<T> values(x.numel());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = xv[i] * factors[i];
  auto xi = x.impl();
  return make_result<T>("dropout", x.shape(), std::move(values), {x},
                        [xi, factors = std::move(factors)](const TensorImpl<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            xi->grad[i] += o.grad[i] * factors[i];
                          }
                        });
}

template <Real T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets,
                          const Mask& mask) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("bce_with_logits: logits " + to_string(logits.shape()) +
                     " vs targets " + to_string(targets.shape()));
  }
  check_mask<T>(mask);
  const auto mmap = broadcast_index_map(logits.shape(), mask.shape);
  const auto zv = logits.values();
  const auto tv = targets.values();
  std::vector<T> values(zv.size(), T{0});
  std::vector<T> slope(zv.size(), T{0});
  for (std::size_t i = 0; i < zv.size(); ++i) {
    if (mask.valid[mmap[i]] == 0) continue;
    const T z = zv[i];
    const T t = tv[i];
    if (t != T{0} && t != T{1}) {
      throw ValidationError("bce target must be 0 or 1, got " +
                            std::to_string(t));
    }
    values[i] = std::max(z, T{0}) - z * t + std::log1p(std::exp(-std::abs(z)));
    const T sigmoid = z >= T{0} ? T{1} / (T{1} + std::exp(-z))
                                : std::exp(z) / (T{1} + std::exp(z));
    slope[i] = sigmoid - t;
  }
  auto zi = logits.impl();
  return make_result<T>("bce_with_logits", logits.shape(), std::move(values),
                        {logits},
                        [zi, slope = std::move(slope)](const TensorImpl<T>& o) {
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            zi->grad[i] += o.grad[i] * slope[i];
                          }
                        });
}

template <Real T>
Tensor<T> sum(const Tensor<T>& x) {
  T total{0};
  for (const T v : x.values()) total += v;
  auto xi = x.impl();
  return make_result<T>("sum", {}, {total}, {x}, [xi](const TensorImpl<T>& o) {
    for (T& g : xi->grad) g += o.grad[0];
  });
}

template <Real T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

#define GROUNDING_INSTANTIATE_OPS(T)                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> scale(const Tensor<T>&, T);                              \
  template Tensor<T> gelu(const Tensor<T>&);                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                        \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&); \
  template Tensor<T> transpose_last2(const Tensor<T>&);                       \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>); \
  template Tensor<T> softmax_lastdim(const Tensor<T>&, const std::optional<Mask>&); \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,           \
                                const Tensor<T>&, T);                         \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng*);           \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&,      \
                                     const Mask&);                            \
  template Tensor<T> sum(const Tensor<T>&);                                   \
  template Tensor<T> mean(const Tensor<T>&);

GROUNDING_INSTANTIATE_OPS(float)
GROUNDING_INSTANTIATE_OPS(double)

}  // namespace grounding

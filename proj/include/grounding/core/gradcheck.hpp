#pragma once

#include <functional>
#include <span>
#include <vector>

#include "grounding/core/tensor.hpp"

namespace grounding {

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h against the
// reverse-mode gradient of f at x, element by element. Returns the largest
// relative error. `x` must be a leaf that requires grad; its values are
// restored before returning.
double finite_diff_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         Tensor<double> x, double h = 1e-5);

// Same check over several leaves of a closed-over function, e.g. every
// parameter of a model. Entry i of the result belongs to params[i].
std::vector<double> finite_diff_check(const std::function<Tensor<double>()>& f,
                                      std::span<Tensor<double>> params,
                                      double h = 1e-5);

}  // namespace grounding

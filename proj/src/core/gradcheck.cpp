#include "grounding/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "grounding/core/errors.hpp"

namespace grounding {
namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  NoGradGuard no_grad;
  const double value = f().item();
  if (!std::isfinite(value)) {
    throw NumericError("finite_diff_check: f is not finite");
  }
  return value;
}

}  // namespace

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

double finite_diff_check(
    const std::function<Tensor<double>(const Tensor<double>&)>& f,
    Tensor<double> x, double h) {
  Tensor<double> leaves[] = {x};
  return finite_diff_check([&] { return f(x); }, leaves, h).front();
}

std::vector<double> finite_diff_check(const std::function<Tensor<double>()>& f,
                                      std::span<Tensor<double>> params,
                                      double h) {
  for (auto& p : params) {
    if (!p.is_leaf() || !p.requires_grad()) {
      throw ValidationError("finite_diff_check needs leaves that require grad");
    }
    p.zero_grad();
  }
  const Tensor<double> loss = f();
  if (!std::isfinite(loss.item())) {
    throw NumericError("finite_diff_check: f is not finite");
  }
  backward(loss);

  std::vector<double> worst(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_values();
    const auto analytic = params[k].grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate(f);
      values[i] = saved - h;
      const double down = evaluate(f);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      worst[k] = std::max(worst[k], relative_error(analytic[i], numeric));
    }
  }
  return worst;
}

}  // namespace grounding

#pragma once

#include <string>
#include <vector>

#include "grounding/core/rng.hpp"
#include "grounding/core/tensor.hpp"

namespace grounding {

template <Real T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

// Ordered registry of learned tensors. Order is creation order and defines
// checkpoint layout.
template <Real T>
class ParameterSet {
 public:
  Tensor<T> add(std::string name, Tensor<T> tensor);

  std::vector<NamedParameter<T>>& entries() { return entries_; }
  const std::vector<NamedParameter<T>>& entries() const { return entries_; }
  std::vector<Tensor<T>> tensors() const;
  const Tensor<T>& find(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedParameter<T>> entries_;
};

// Creates leaves that require grad and registers them under `prefix`.
template <Real T>
class ParameterFactory {
 public:
  ParameterFactory(ParameterSet<T>& set, Rng& rng, double init_std)
      : set_(set), rng_(rng), init_std_(init_std) {}

  ParameterFactory scoped(const std::string& prefix) const;

  Tensor<T> normal(const std::string& name, Shape shape);
  Tensor<T> zeros(const std::string& name, Shape shape);
  Tensor<T> ones(const std::string& name, Shape shape);

 private:
  std::string qualify(const std::string& name) const;

  ParameterSet<T>& set_;
  Rng& rng_;
  double init_std_;
  std::string prefix_;
};

}  // namespace grounding

#include "grounding/core/parameters.hpp"

#include "grounding/core/errors.hpp"

namespace grounding {

template <Real T>
Tensor<T> ParameterSet<T>::add(std::string name, Tensor<T> tensor) {
  for (const auto& entry : entries_) {
    if (entry.name == name) throw ValidationError("duplicate parameter " + name);
  }
  entries_.push_back({std::move(name), tensor});
  return tensor;
}

template <Real T>
std::vector<Tensor<T>> ParameterSet<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.tensor);
  return out;
}

template <Real T>
const Tensor<T>& ParameterSet<T>::find(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.name == name) return entry.tensor;
  }
  throw ValidationError("no parameter named " + name);
}

template <Real T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t total = 0;
  for (const auto& entry : entries_) total += entry.tensor.numel();
  return total;
}

template <Real T>
void ParameterSet<T>::zero_grad() {
  for (auto& entry : entries_) entry.tensor.zero_grad();
}

template <Real T>
ParameterFactory<T> ParameterFactory<T>::scoped(const std::string& prefix) const {
  ParameterFactory child = *this;
  child.prefix_ = qualify(prefix);
  return child;
}

template <Real T>
std::string ParameterFactory<T>::qualify(const std::string& name) const {
  return prefix_.empty() ? name : prefix_ + "." + name;
}

template <Real T>
Tensor<T> ParameterFactory<T>::normal(const std::string& name, Shape shape) {
  std::vector<T> values(numel(shape));
  for (T& v : values) v = static_cast<T>(rng_.normal(0.0, init_std_));
  return set_.add(qualify(name), Tensor<T>::from(std::move(shape), std::move(values), true));
}

template <Real T>
Tensor<T> ParameterFactory<T>::zeros(const std::string& name, Shape shape) {
  return set_.add(qualify(name), Tensor<T>::zeros(std::move(shape), true));
}

template <Real T>
Tensor<T> ParameterFactory<T>::ones(const std::string& name, Shape shape) {
  return set_.add(qualify(name), Tensor<T>::full(std::move(shape), T{1}, true));
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class ParameterFactory<float>;
template class ParameterFactory<double>;

}  // namespace grounding

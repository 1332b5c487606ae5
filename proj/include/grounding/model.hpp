#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "grounding/core/parameters.hpp"
#include "grounding/core/rng.hpp"
#include "grounding/data/batch.hpp"
#include "grounding/encoder/config.hpp"
#include "grounding/encoder/encoder.hpp"
#include "grounding/head/grounding_head.hpp"

namespace grounding {

struct ModelConfig {
  BranchConfig text = BranchConfig::bert_base_text();
  BranchConfig image = BranchConfig::default_image();
  std::size_t joint_dim = 768;
  double init_std = 0.02;
  double layer_norm_eps = 1e-12;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate_model_config(const ModelConfig& config);

// Named float32 copy of one parameter; the unit of checkpoint payloads.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

// Text branch, image branch and grounding head with all of their weights.
// Parameters are created in a fixed order from the given generator.
template <Real T>
class GroundingModel {
 public:
  GroundingModel(const ModelConfig& config, Rng& rng);

  GroundingModel(const GroundingModel&) = delete;
  GroundingModel& operator=(const GroundingModel&) = delete;
  GroundingModel(GroundingModel&&) = default;
  GroundingModel& operator=(GroundingModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }

  // Overrides the image branch dropout used by later forward passes.
  void set_image_dropout(double p);

  GroundingLogits<T> forward(const Batch& batch, ForwardContext& ctx) const;
  Tensor<T> loss(const Batch& batch, ForwardContext& ctx) const;

  std::vector<NamedArray> export_parameters() const;
  // Names, order and shapes must match this model exactly.
  void import_parameters(const std::vector<NamedArray>& arrays);

 private:
  ModelConfig config_;
  ParameterSet<T> params_;
  TextBranch<T> text_;
  ImageBranch<T> image_;
  HeadParams<T> head_;
};

}  // namespace grounding

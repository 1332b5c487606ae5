#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "grounding/data/synthetic.hpp"
#include "grounding/model.hpp"
#include "grounding/training/train_config.hpp"

namespace grounding {

// Desk-scale model: text 2 layers / 2 heads / width 8, image 1 layer /
// 2 heads / width 8 with the spatial embedding, joint width 8.
// At width 8 the BERT scale of 0.02 leaves attention gradients below
// finite-difference resolution and stalls training at a saddle.
inline constexpr double kToyInitStd = 0.35;

ModelConfig toy_model_config(std::size_t vocab_size = 50,
                             std::size_t feature_dim = 32);

// Memorization run on the default synthetic set: dropout off in both
// branches.
ModelConfig overfit_model_config();
TrainConfig overfit_train_config();

// Two samples of 6 tokens, 4 objects and 3 entities each.
SyntheticSpec gradcheck_data_spec(std::uint64_t seed = 11);

struct GradcheckSummary {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::vector<std::pair<std::string, double>> per_parameter;
};

// Finite differences against reverse mode for every parameter of a 64-bit
// toy model on the full grounding loss, dropout included (each evaluation
// replays the same masks).
GradcheckSummary run_model_gradcheck(std::uint64_t seed = 11);

}  // namespace grounding

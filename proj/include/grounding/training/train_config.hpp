#pragma once

#include <cstddef>
#include <cstdint>

namespace grounding {

// Optimization protocol. batch_size is the effective batch: each optimizer
// step accumulates accumulation_steps micro-batches of
// batch_size / accumulation_steps samples. dropout_p is the image branch
// dropout during training.
struct TrainConfig {
  double learning_rate = 5e-5;
  double clip_norm = 0.25;
  std::size_t batch_size = 256;
  std::size_t accumulation_steps = 2;
  std::size_t max_epochs = 10;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  double dropout_p = 0.4;

  std::size_t micro_batch_size() const { return batch_size / accumulation_steps; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate_train_config(const TrainConfig& config);

}  // namespace grounding

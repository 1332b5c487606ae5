#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "grounding/core/rng.hpp"
#include "grounding/data/batch.hpp"
#include "grounding/data/record.hpp"
#include "grounding/model.hpp"
#include "grounding/training/checkpoint.hpp"
#include "grounding/training/optimizer.hpp"
#include "grounding/training/train_config.hpp"

namespace grounding {

struct StepMetrics {
  double loss = 0.0;       // mean of the micro-batch losses
  double grad_norm = 0.0;  // global norm before clipping
};

// One optimizer update from a group of micro-batches: gradients are summed
// over the group and divided by its size, clipped, applied with Adam and
// then cleared. Dropout draws come from `rng`.
template <Real T>
StepMetrics train_step(std::span<const Batch> micro_batches,
                       GroundingModel<T>& model, AdamState<T>& optimizer,
                       const TrainConfig& config, Rng& rng);

template <Real T>
OptimizerSnapshot snapshot_optimizer(const GroundingModel<T>& model,
                                     const AdamState<T>& state);
template <Real T>
AdamState<T> restore_optimizer(const GroundingModel<T>& model,
                               const OptimizerSnapshot& snapshot);

struct FitOptions {
  // When set, best.gckp and last.gckp are rewritten here after each epoch.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Continue from `resume` (the last state of an earlier run) whose best
  // state so far is `resume_best`. Both or neither.
  const Checkpoint* resume = nullptr;
  const Checkpoint* resume_best = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  Checkpoint best;  // state at the epoch with the highest dev R@1
  Checkpoint last;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

// Epoch loop: seeded shuffle, micro-batches of config.micro_batch_size()
// grouped accumulation_steps at a time (a short final group divides by its
// own size), then dev R@1. Stops once more than `patience` consecutive
// epochs fail to improve on the best, or after max_epochs. The image branch
// dropout is set to config.dropout_p.
template <Real T>
FitResult fit(std::span<const SampleRecord> train_set,
              std::span<const SampleRecord> dev_set, GroundingModel<T>& model,
              const TrainConfig& config, const FitOptions& options = {});

}  // namespace grounding

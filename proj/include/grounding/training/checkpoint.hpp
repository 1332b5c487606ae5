#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grounding/model.hpp"
#include "grounding/training/train_config.hpp"

namespace grounding {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_recall_at_1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Adam moments in parameter order, named after their parameter.
struct OptimizerSnapshot {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<NamedArray> first_moment;
  std::vector<NamedArray> second_moment;

  friend bool operator==(const OptimizerSnapshot&,
                         const OptimizerSnapshot&) = default;
};

// Training state after `epoch` completed epochs.
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::size_t epoch = 0;
  double best_metric = -1.0;  // best dev R@1 so far; -1 before any epoch
  std::size_t best_epoch = 0;
  std::size_t epochs_without_improvement = 0;
  std::string rng_state;
  std::vector<EpochRecord> history;
  std::vector<NamedArray> parameters;
  OptimizerSnapshot optimizer;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// File layout:
//   "GCKP", u8 version = 1, u32 manifest length, manifest (UTF-8 JSON),
//   then every array's float32 values, little-endian, back to back.
// The manifest directory lists each array's name, shape and offset (in
// floats) in payload order: parameters, then "adam.m.<name>", then
// "adam.v.<name>".
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grounding

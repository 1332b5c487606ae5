#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "grounding/data/synthetic.hpp"
#include "grounding/encoder/config.hpp"
#include "grounding/model.hpp"
#include "grounding/training/train_config.hpp"

namespace grounding {

// Everything a `train` invocation needs. Paths are as written in the config
// file; load_run_config resolves relative ones against the file's directory.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path train_data;
  std::filesystem::path dev_data;
  std::filesystem::path output_dir;
};

// JSON field names mirror the struct fields. Readers start from the
// defaults, so absent keys keep them; unknown keys are rejected to catch
// typos. Malformed values throw ValidationError.
nlohmann::ordered_json to_json(const BranchConfig& config);
nlohmann::ordered_json to_json(const ModelConfig& config);
nlohmann::ordered_json to_json(const TrainConfig& config);
nlohmann::ordered_json to_json(const SyntheticSpec& spec);
nlohmann::ordered_json to_json(const RunConfig& config);

BranchConfig branch_config_from_json(const nlohmann::ordered_json& j,
                                     const BranchConfig& defaults);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);
SyntheticSpec synthetic_spec_from_json(const nlohmann::ordered_json& j);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);

// Reads a JSON file. Throws std::runtime_error naming the path when it
// cannot be opened and FormatError on malformed JSON.
nlohmann::ordered_json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::ordered_json& j,
                     const std::filesystem::path& path);

// Parses, resolves relative paths and checks that both datasets exist.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace grounding

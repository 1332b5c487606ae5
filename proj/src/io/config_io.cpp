#include "grounding/io/config_io.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "grounding/core/errors.hpp"

namespace grounding {
namespace {

using nlohmann::ordered_json;

void require_object(const ordered_json& j, std::string_view what,
                    std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) {
    throw ValidationError(std::string(what) + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || k == key;
    if (!known) {
      throw ValidationError("unknown key '" + key + "' in " + std::string(what));
    }
  }
}

template <typename V>
void read(const ordered_json& j, const char* key, V& out, std::string_view what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(what) + "." + key + " has the wrong type");
  }
}

// Non-negative integer fields reject negative JSON numbers instead of
// wrapping them.
void read_count(const ordered_json& j, const char* key, std::size_t& out,
                std::string_view what) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() ||
      (!v.is_number_unsigned() && v.get<long long>() < 0)) {
    throw ValidationError(std::string(what) + "." + key +
                          " must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

ordered_json to_json(const BranchConfig& c) {
  ordered_json j;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["hidden_dim"] = c.hidden_dim;
  j["ffn_dim"] = c.ffn_dim;
  j["dropout_p"] = c.dropout_p;
  j["vocab_size"] = c.vocab_size;
  j["max_positions"] = c.max_positions;
  j["feature_dim"] = c.feature_dim;
  j["use_spatial"] = c.use_spatial;
  j["spatial_hidden"] = c.spatial_hidden;
  return j;
}

ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["text"] = to_json(c.text);
  j["image"] = to_json(c.image);
  j["head"] = {{"joint_dim", c.joint_dim}};
  j["init_std"] = c.init_std;
  j["layer_norm_eps"] = c.layer_norm_eps;
  return j;
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["clip_norm"] = c.clip_norm;
  j["batch_size"] = c.batch_size;
  j["accumulation_steps"] = c.accumulation_steps;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["dropout_p"] = c.dropout_p;
  return j;
}

ordered_json to_json(const SyntheticSpec& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["num_samples"] = s.num_samples;
  j["vocab_size"] = s.vocab_size;
  j["tokens_per_sample"] = s.tokens_per_sample;
  j["objects_per_sample"] = s.objects_per_sample;
  j["entities_per_sample"] = s.entities_per_sample;
  j["d_feat"] = s.d_feat;
  j["num_concepts"] = s.num_concepts;
  j["max_positives"] = s.max_positives;
  j["noise_scale"] = s.noise_scale;
  j["image_width"] = s.image_width;
  j["image_height"] = s.image_height;
  return j;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j = to_json(c.model);
  j["train"] = to_json(c.train);
  j["train_data"] = c.train_data.generic_string();
  j["dev_data"] = c.dev_data.generic_string();
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

BranchConfig branch_config_from_json(const ordered_json& j,
                                     const BranchConfig& defaults) {
  constexpr std::string_view what = "branch config";
  require_object(j, what,
                 {"num_layers", "num_heads", "hidden_dim", "ffn_dim", "dropout_p",
                  "vocab_size", "max_positions", "feature_dim", "use_spatial",
                  "spatial_hidden"});
  BranchConfig c = defaults;
  read_count(j, "num_layers", c.num_layers, what);
  read_count(j, "num_heads", c.num_heads, what);
  read_count(j, "hidden_dim", c.hidden_dim, what);
  read_count(j, "ffn_dim", c.ffn_dim, what);
  read(j, "dropout_p", c.dropout_p, what);
  read_count(j, "vocab_size", c.vocab_size, what);
  read_count(j, "max_positions", c.max_positions, what);
  read_count(j, "feature_dim", c.feature_dim, what);
  read(j, "use_spatial", c.use_spatial, what);
  read_count(j, "spatial_hidden", c.spatial_hidden, what);
  return c;
}

namespace {

ModelConfig model_fields(const ordered_json& j) {
  ModelConfig c;
  if (j.contains("text")) {
    c.text = branch_config_from_json(j.at("text"), c.text);
  }
  if (j.contains("image")) {
    c.image = branch_config_from_json(j.at("image"), c.image);
  }
  if (j.contains("head")) {
    require_object(j.at("head"), "head", {"joint_dim"});
    read_count(j.at("head"), "joint_dim", c.joint_dim, "head");
  }
  read(j, "init_std", c.init_std, "model");
  read(j, "layer_norm_eps", c.layer_norm_eps, "model");
  return c;
}

}  // namespace

ModelConfig model_config_from_json(const ordered_json& j) {
  require_object(j, "model config",
                 {"text", "image", "head", "init_std", "layer_norm_eps"});
  ModelConfig c = model_fields(j);
  validate_model_config(c);
  return c;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  constexpr std::string_view what = "train";
  require_object(j, what,
                 {"learning_rate", "clip_norm", "batch_size", "accumulation_steps",
                  "max_epochs", "patience", "seed", "dropout_p"});
  TrainConfig c;
  read(j, "learning_rate", c.learning_rate, what);
  read(j, "clip_norm", c.clip_norm, what);
  read_count(j, "batch_size", c.batch_size, what);
  read_count(j, "accumulation_steps", c.accumulation_steps, what);
  read_count(j, "max_epochs", c.max_epochs, what);
  read_count(j, "patience", c.patience, what);
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned()) {
      throw ValidationError("train.seed must be a non-negative integer");
    }
    c.seed = v.get<std::uint64_t>();
  }
  read(j, "dropout_p", c.dropout_p, what);
  validate_train_config(c);
  return c;
}

SyntheticSpec synthetic_spec_from_json(const ordered_json& j) {
  constexpr std::string_view what = "synthetic spec";
  require_object(j, what,
                 {"seed", "num_samples", "vocab_size", "tokens_per_sample",
                  "objects_per_sample", "entities_per_sample", "d_feat",
                  "num_concepts", "max_positives", "noise_scale", "image_width",
                  "image_height"});
  SyntheticSpec s;
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned()) {
      throw ValidationError("synthetic spec seed must be a non-negative integer");
    }
    s.seed = v.get<std::uint64_t>();
  }
  read_count(j, "num_samples", s.num_samples, what);
  read_count(j, "vocab_size", s.vocab_size, what);
  read_count(j, "tokens_per_sample", s.tokens_per_sample, what);
  read_count(j, "objects_per_sample", s.objects_per_sample, what);
  read_count(j, "entities_per_sample", s.entities_per_sample, what);
  read_count(j, "d_feat", s.d_feat, what);
  read_count(j, "num_concepts", s.num_concepts, what);
  read_count(j, "max_positives", s.max_positives, what);
  read(j, "noise_scale", s.noise_scale, what);
  read(j, "image_width", s.image_width, what);
  read(j, "image_height", s.image_height, what);
  validate_spec(s);
  return s;
}

RunConfig run_config_from_json(const ordered_json& j) {
  require_object(j, "run config",
                 {"text", "image", "head", "init_std", "layer_norm_eps", "train",
                  "train_data", "dev_data", "output_dir"});
  RunConfig c;
  c.model = model_fields(j);
  validate_model_config(c.model);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  std::string path;
  if (!j.contains("train_data") || !j.contains("dev_data") ||
      !j.contains("output_dir")) {
    throw ValidationError(
        "run config needs train_data, dev_data and output_dir");
  }
  read(j, "train_data", path, "run config");
  c.train_data = path;
  read(j, "dev_data", path, "run config");
  c.dev_data = path;
  read(j, "output_dir", path, "run config");
  c.output_dir = path;
  return c;
}

ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c = run_config_from_json(read_json_file(path));
  const auto base = path.parent_path();
  for (auto* p : {&c.train_data, &c.dev_data, &c.output_dir}) {
    if (p->is_relative()) *p = base / *p;
  }
  for (const auto* p : {&c.train_data, &c.dev_data}) {
    if (!std::filesystem::exists(*p)) {
      throw ValidationError("dataset not found: " + p->string());
    }
  }
  return c;
}

}  // namespace grounding

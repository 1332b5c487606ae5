#include "grounding/encoder/config.hpp"

#include <regex>

#include "grounding/core/errors.hpp"

namespace grounding {
namespace {

void validate_common(const BranchConfig& c, const char* branch) {
  const std::string name(branch);
  if (c.num_layers == 0 || c.num_heads == 0 || c.hidden_dim == 0 ||
      c.ffn_dim == 0) {
    throw ValidationError(name + " branch: layers, heads, hidden_dim and "
                                 "ffn_dim must be positive");
  }
  if (c.hidden_dim % c.num_heads != 0) {
    throw ValidationError(name + " branch: hidden_dim " +
                          std::to_string(c.hidden_dim) +
                          " not divisible by num_heads " +
                          std::to_string(c.num_heads));
  }
  if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) {
    throw ValidationError(name + " branch: dropout_p must lie in [0, 1)");
  }
}

}  // namespace

BranchConfig BranchConfig::bert_base_text() {
  BranchConfig c;
  c.num_layers = 12;
  c.num_heads = 12;
  c.hidden_dim = 768;
  c.ffn_dim = 4 * 768;
  c.dropout_p = 0.1;
  c.vocab_size = 30522;
  c.max_positions = 512;
  return c;
}

BranchConfig BranchConfig::default_image() {
  BranchConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hidden_dim = 2048;
  c.ffn_dim = 4 * 2048;
  c.dropout_p = 0.4;
  c.feature_dim = 2048;
  c.use_spatial = true;
  return c;
}

void validate_text_config(const BranchConfig& config) {
  validate_common(config, "text");
  if (config.vocab_size == 0 || config.max_positions == 0) {
    throw ValidationError("text branch: vocab_size and max_positions must be positive");
  }
}

void validate_image_config(const BranchConfig& config) {
  validate_common(config, "image");
  if (config.feature_dim == 0) {
    throw ValidationError("image branch: feature_dim must be positive");
  }
}

std::string run_label(const BranchConfig& image) {
  std::string label = "L" + std::to_string(image.num_layers) + "-H" +
                      std::to_string(image.num_heads);
  if (image.use_spatial) label += "-abs";
  return label;
}

RunLabel parse_run_label(const std::string& label) {
  static const std::regex pattern(R"(L([1-9][0-9]*)-H([1-9][0-9]*)(-abs)?)");
  std::smatch match;
  if (!std::regex_match(label, match, pattern)) {
    throw ValidationError("malformed run label '" + label + "'");
  }
  return {std::stoul(match[1].str()), std::stoul(match[2].str()),
          match[3].matched};
}

}  // namespace grounding

#pragma once

#include <cstddef>
#include <string>

namespace grounding {

// Shape of one transformer encoder branch. Mode-specific fields are ignored
// by the other branch: vocab_size and max_positions are text-only,
// feature_dim, use_spatial and spatial_hidden are image-only.
struct BranchConfig {
  std::size_t num_layers = 1;
  std::size_t num_heads = 1;
  std::size_t hidden_dim = 8;
  std::size_t ffn_dim = 32;
  double dropout_p = 0.1;

  std::size_t vocab_size = 0;
  std::size_t max_positions = 0;

  std::size_t feature_dim = 0;
  bool use_spatial = false;
  std::size_t spatial_hidden = 0;  // 0 means hidden_dim

  std::size_t head_dim() const { return hidden_dim / num_heads; }
  std::size_t spatial_width() const {
    return spatial_hidden == 0 ? hidden_dim : spatial_hidden;
  }

  // BERT-base: 12 layers, 12 heads, width 768.
  static BranchConfig bert_base_text();
  // Best image branch configuration: 1 layer, 2 heads, width 2048, spatial
  // embedding on.
  static BranchConfig default_image();

  friend bool operator==(const BranchConfig&, const BranchConfig&) = default;
};

void validate_text_config(const BranchConfig& config);
void validate_image_config(const BranchConfig& config);

// Run label L{layers}-H{heads}[-abs] of an image branch configuration.
std::string run_label(const BranchConfig& image);

struct RunLabel {
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  bool use_spatial = false;

  friend bool operator==(const RunLabel&, const RunLabel&) = default;
};

// Inverse of run_label; throws ValidationError on malformed labels.
RunLabel parse_run_label(const std::string& label);

}  // namespace grounding

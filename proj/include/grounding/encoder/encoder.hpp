#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "grounding/core/ops.hpp"
#include "grounding/core/parameters.hpp"
#include "grounding/core/rng.hpp"
#include "grounding/core/tensor.hpp"
#include "grounding/data/box.hpp"
#include "grounding/encoder/config.hpp"

namespace grounding {

// Per-pass switches. Dropout draws from `rng` in a fixed order: text
// embeddings, text layers, image embeddings, image layers.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

template <Real T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  static Linear create(ParameterFactory<T> factory, std::size_t in,
                       std::size_t out);
};

// x . W + b over the last axis.
template <Real T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& layer);

template <Real T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;
  T eps = T(1e-12);

  static LayerNormParams create(ParameterFactory<T> factory, std::size_t dim,
                                double eps);
};

template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const LayerNormParams<T>& norm) {
  return layer_norm(x, norm.gain, norm.bias, norm.eps);
}

template <Real T>
struct AttentionParams {
  Linear<T> query;
  // No key bias: it shifts every score of a query row by the same amount,
  // which the softmax cancels.
  Tensor<T> key;  // [d, d]
  Linear<T> value;
  Linear<T> output;
};

template <Real T>
struct EncoderLayerParams {
  AttentionParams<T> attention;
  LayerNormParams<T> attention_norm;
  Linear<T> ffn_in;
  Linear<T> ffn_out;
  LayerNormParams<T> ffn_norm;

  static EncoderLayerParams create(ParameterFactory<T> factory,
                                   const BranchConfig& config, double eps);
};

template <Real T>
struct TextEmbeddings {
  Tensor<T> token_table;     // [vocab, d]
  Tensor<T> position_table;  // [max_positions, d]
  LayerNormParams<T> norm;
};

template <Real T>
struct SpatialMLP {
  Linear<T> layer1;  // 5 -> hidden
  Linear<T> layer2;  // hidden -> d
};

template <Real T>
struct ImageEmbeddings {
  std::optional<Linear<T>> input_projection;  // present iff feature_dim != d
  std::optional<SpatialMLP<T>> spatial;       // present iff use_spatial
  LayerNormParams<T> norm;
};

template <Real T>
struct TextBranch {
  BranchConfig config;
  TextEmbeddings<T> embeddings;
  std::vector<EncoderLayerParams<T>> layers;

  static TextBranch create(const BranchConfig& config,
                           ParameterFactory<T> factory, double eps);
};

template <Real T>
struct ImageBranch {
  BranchConfig config;
  ImageEmbeddings<T> embeddings;
  std::vector<EncoderLayerParams<T>> layers;

  static ImageBranch create(const BranchConfig& config,
                            ParameterFactory<T> factory, double eps);
};

// Padded token ids, row-major [batch, seq_len].
struct TextInput {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::size_t> token_ids;
  std::vector<std::uint8_t> valid;
};

// Padded RoI features [batch, num_objects, feature_dim] with their boxes.
struct ImageInput {
  std::size_t batch = 0;
  std::size_t num_objects = 0;
  std::size_t feature_dim = 0;
  std::vector<float> features;
  std::vector<Box> boxes;             // [batch * num_objects]
  std::vector<std::uint8_t> valid;    // [batch * num_objects]
  std::vector<double> image_width;    // [batch]
  std::vector<double> image_height;   // [batch]
};

void validate_input(const TextInput& input, const BranchConfig& config);
void validate_input(const ImageInput& input, const BranchConfig& config);

// [x1/W, y1/H, x2/W, y2/H, area/(W*H)], every component in [0, 1].
std::array<double, 5> normalize_box(const Box& box, double width, double height);

// token_table[id] + position_table[offset], then layer norm and dropout.
template <Real T>
Tensor<T> embed_tokens(const TextInput& input, const TextEmbeddings<T>& table,
                       double dropout_p, ForwardContext& ctx);

// layer2(gelu(layer1(nbox))) over a trailing axis of 5.
template <Real T>
Tensor<T> spatial_embed(const Tensor<T>& normalized_boxes,
                        const SpatialMLP<T>& mlp);

// RoI features (projected if needed) plus the spatial embedding when
// enabled, then layer norm and dropout.
template <Real T>
Tensor<T> embed_objects(const ImageInput& input,
                        const ImageEmbeddings<T>& embeddings,
                        double dropout_p, ForwardContext& ctx);

// Scaled dot-product attention over `num_heads` heads with padded keys
// excluded. `x` is [batch, seq, d] or [seq, d]; `valid` has batch * seq
// entries. Outputs at padded query positions are unspecified.
template <Real T>
Tensor<T> multi_head_self_attention(const Tensor<T>& x,
                                    std::span<const std::uint8_t> valid,
                                    std::size_t num_heads,
                                    const AttentionParams<T>& params);

// Post-norm block: LN(x + drop(MHSA(x))), then LN(h + drop(FFN(h))).
template <Real T>
Tensor<T> encoder_layer(const Tensor<T>& x, std::span<const std::uint8_t> valid,
                        const BranchConfig& config,
                        const EncoderLayerParams<T>& params,
                        ForwardContext& ctx);

// Embedding stage followed by every encoder layer; [batch, seq, d].
template <Real T>
Tensor<T> encode_branch(const TextInput& input, const TextBranch<T>& branch,
                        ForwardContext& ctx);
template <Real T>
Tensor<T> encode_branch(const ImageInput& input, const ImageBranch<T>& branch,
                        ForwardContext& ctx);

}  // namespace grounding

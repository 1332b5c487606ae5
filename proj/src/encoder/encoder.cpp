#include "grounding/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grounding/core/errors.hpp"

namespace grounding {
namespace {

void require_each_sequence_valid(std::span<const std::uint8_t> valid,
                                 std::size_t batch, std::size_t seq,
                                 const char* what) {
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = valid.subspan(b * seq, seq);
    if (std::none_of(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; })) {
      throw ValidationError(std::string(what) + " sequence " + std::to_string(b) +
                            " has no valid position");
    }
  }
}

}  // namespace

template <Real T>
Linear<T> Linear<T>::create(ParameterFactory<T> factory, std::size_t in,
                            std::size_t out) {
  return {factory.normal("weight", {in, out}), factory.zeros("bias", {out})};
}

template <Real T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& layer) {
  return add(matmul(x, layer.weight), layer.bias);
}

template <Real T>
LayerNormParams<T> LayerNormParams<T>::create(ParameterFactory<T> factory,
                                              std::size_t dim, double eps) {
  return {factory.ones("gain", {dim}), factory.zeros("bias", {dim}),
          static_cast<T>(eps)};
}

template <Real T>
EncoderLayerParams<T> EncoderLayerParams<T>::create(ParameterFactory<T> factory,
                                                    const BranchConfig& config,
                                                    double eps) {
  const std::size_t d = config.hidden_dim;
  EncoderLayerParams<T> p;
  p.attention.query = Linear<T>::create(factory.scoped("attention.query"), d, d);
  p.attention.key = factory.normal("attention.key.weight", {d, d});
  p.attention.value = Linear<T>::create(factory.scoped("attention.value"), d, d);
  p.attention.output = Linear<T>::create(factory.scoped("attention.output"), d, d);
  p.attention_norm = LayerNormParams<T>::create(factory.scoped("attention_norm"), d, eps);
  p.ffn_in = Linear<T>::create(factory.scoped("ffn_in"), d, config.ffn_dim);
  p.ffn_out = Linear<T>::create(factory.scoped("ffn_out"), config.ffn_dim, d);
  p.ffn_norm = LayerNormParams<T>::create(factory.scoped("ffn_norm"), d, eps);
  return p;
}

template <Real T>
TextBranch<T> TextBranch<T>::create(const BranchConfig& config,
                                    ParameterFactory<T> factory, double eps) {
  validate_text_config(config);
  TextBranch<T> branch;
  branch.config = config;
  const std::size_t d = config.hidden_dim;
  auto emb = factory.scoped("embeddings");
  branch.embeddings.token_table = emb.normal("token_table", {config.vocab_size, d});
  branch.embeddings.position_table =
      emb.normal("position_table", {config.max_positions, d});
  branch.embeddings.norm = LayerNormParams<T>::create(emb.scoped("norm"), d, eps);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    branch.layers.push_back(EncoderLayerParams<T>::create(
        factory.scoped("layer" + std::to_string(l)), config, eps));
  }
  return branch;
}

template <Real T>
ImageBranch<T> ImageBranch<T>::create(const BranchConfig& config,
                                      ParameterFactory<T> factory, double eps) {
  validate_image_config(config);
  ImageBranch<T> branch;
  branch.config = config;
  const std::size_t d = config.hidden_dim;
  auto emb = factory.scoped("embeddings");
  if (config.feature_dim != d) {
    branch.embeddings.input_projection =
        Linear<T>::create(emb.scoped("input_projection"), config.feature_dim, d);
  }
  if (config.use_spatial) {
    SpatialMLP<T> mlp;
    mlp.layer1 = Linear<T>::create(emb.scoped("spatial.layer1"), 5,
                                   config.spatial_width());
    mlp.layer2 = Linear<T>::create(emb.scoped("spatial.layer2"),
                                   config.spatial_width(), d);
    branch.embeddings.spatial = mlp;
  }
  branch.embeddings.norm = LayerNormParams<T>::create(emb.scoped("norm"), d, eps);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    branch.layers.push_back(EncoderLayerParams<T>::create(
        factory.scoped("layer" + std::to_string(l)), config, eps));
  }
  return branch;
}

void validate_input(const TextInput& input, const BranchConfig& config) {
  const std::size_t n = input.batch * input.seq_len;
  if (n == 0 || input.token_ids.size() != n || input.valid.size() != n) {
    throw ShapeError("text input does not match [" + std::to_string(input.batch) +
                     ", " + std::to_string(input.seq_len) + "]");
  }
  if (input.seq_len > config.max_positions) {
    throw ValidationError("sequence length " + std::to_string(input.seq_len) +
                          " exceeds max_positions " +
                          std::to_string(config.max_positions));
  }
  for (std::size_t id : input.token_ids) {
    if (id >= config.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) +
                            " out of range for vocabulary of " +
                            std::to_string(config.vocab_size));
    }
  }
  require_each_sequence_valid(input.valid, input.batch, input.seq_len, "text");
}

void validate_input(const ImageInput& input, const BranchConfig& config) {
  const std::size_t n = input.batch * input.num_objects;
  if (n == 0 || input.valid.size() != n || input.boxes.size() != n ||
      input.features.size() != n * input.feature_dim ||
      input.image_width.size() != input.batch ||
      input.image_height.size() != input.batch) {
    throw ShapeError("image input does not match [" + std::to_string(input.batch) +
                     ", " + std::to_string(input.num_objects) + ", " +
                     std::to_string(input.feature_dim) + "]");
  }
  if (input.feature_dim != config.feature_dim) {
    throw ShapeError("RoI feature dimension " + std::to_string(input.feature_dim) +
                     " does not match configured " +
                     std::to_string(config.feature_dim));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (input.valid[i] == 0) continue;
    const std::size_t b = i / input.num_objects;
    require_within(input.boxes[i], input.image_width[b], input.image_height[b]);
  }
  require_each_sequence_valid(input.valid, input.batch, input.num_objects,
                              "object");
}

std::array<double, 5> normalize_box(const Box& box, double width,
                                    double height) {
  if (!(width > 0 && height > 0)) {
    throw ValidationError("image dimensions must be positive");
  }
  require_within(box, width, height);
  return {box.x1 / width, box.y1 / height, box.x2 / width, box.y2 / height,
          box.area() / (width * height)};
}

template <Real T>
Tensor<T> embed_tokens(const TextInput& input, const TextEmbeddings<T>& table,
                       double dropout_p, ForwardContext& ctx) {
  const std::size_t vocab = table.token_table.dim(0);
  const std::size_t positions = table.position_table.dim(0);
  const std::size_t d = table.token_table.dim(1);
  for (std::size_t id : input.token_ids) {
    if (id >= vocab) {
      throw ValidationError("token id " + std::to_string(id) +
                            " out of range for vocabulary of " +
                            std::to_string(vocab));
    }
  }
  if (input.seq_len > positions) {
    throw ValidationError("sequence length exceeds position table");
  }
  std::vector<std::size_t> offsets(input.seq_len);
  for (std::size_t i = 0; i < offsets.size(); ++i) offsets[i] = i;

  const auto tokens = reshape(gather_rows(table.token_table, input.token_ids),
                              {input.batch, input.seq_len, d});
  const auto pos = gather_rows(table.position_table, offsets);
  const auto summed = add(tokens, pos);
  return dropout(layer_norm(summed, table.norm), dropout_p, ctx.training, ctx.rng);
}

template <Real T>
Tensor<T> spatial_embed(const Tensor<T>& normalized_boxes,
                        const SpatialMLP<T>& mlp) {
  if (normalized_boxes.rank() == 0 || normalized_boxes.shape().back() != 5) {
    throw ShapeError("spatial_embed expects a trailing axis of 5, got " +
                     to_string(normalized_boxes.shape()));
  }
  return linear(gelu(linear(normalized_boxes, mlp.layer1)), mlp.layer2);
}

template <Real T>
Tensor<T> embed_objects(const ImageInput& input,
                        const ImageEmbeddings<T>& embeddings, double dropout_p,
                        ForwardContext& ctx) {
  const std::size_t batch = input.batch;
  const std::size_t objects = input.num_objects;
  std::vector<T> features(input.features.begin(), input.features.end());
  auto x = Tensor<T>::from({batch, objects, input.feature_dim}, std::move(features));
  if (embeddings.input_projection) x = linear(x, *embeddings.input_projection);

  if (embeddings.spatial) {
    // Padded objects get an all-zero box vector; their outputs are never read.
    std::vector<T> nbox(batch * objects * 5, T{0});
    for (std::size_t i = 0; i < batch * objects; ++i) {
      if (input.valid[i] == 0) continue;
      const std::size_t b = i / objects;
      const auto v = normalize_box(input.boxes[i], input.image_width[b],
                                   input.image_height[b]);
      for (std::size_t c = 0; c < 5; ++c) nbox[i * 5 + c] = static_cast<T>(v[c]);
    }
    const auto boxes = Tensor<T>::from({batch, objects, 5}, std::move(nbox));
    x = add(x, spatial_embed(boxes, *embeddings.spatial));
  }
  return dropout(layer_norm(x, embeddings.norm), dropout_p, ctx.training, ctx.rng);
}

template <Real T>
Tensor<T> multi_head_self_attention(const Tensor<T>& x,
                                    std::span<const std::uint8_t> valid,
                                    std::size_t num_heads,
                                    const AttentionParams<T>& params) {
  if (x.rank() == 2) {
    const auto out = multi_head_self_attention(
        reshape(x, {1, x.dim(0), x.dim(1)}), valid, num_heads, params);
    return reshape(out, x.shape());
  }
  if (x.rank() != 3) {
    throw ShapeError("attention input must be [batch, seq, d], got " +
                     to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t seq = x.dim(1);
  const std::size_t d = x.dim(2);
  if (num_heads == 0 || d % num_heads != 0) {
    throw ValidationError("hidden size " + std::to_string(d) +
                          " not divisible into " + std::to_string(num_heads) +
                          " heads");
  }
  if (valid.size() != batch * seq) {
    throw ShapeError("attention mask has " + std::to_string(valid.size()) +
                     " entries for input " + to_string(x.shape()));
  }
  require_each_sequence_valid(valid, batch, seq, "attention");

  const std::size_t dh = d / num_heads;
  const auto split_heads = [&](const Tensor<T>& t) {
    return permute(reshape(t, {batch, seq, num_heads, dh}), {0, 2, 1, 3});
  };
  const auto q = split_heads(linear(x, params.query));
  const auto k = split_heads(matmul(x, params.key));
  const auto v = split_heads(linear(x, params.value));

  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));
  const auto scores = scale(matmul(q, transpose_last2(k)), inv_sqrt);
  Mask keys{{batch, 1, 1, seq}, {valid.begin(), valid.end()}};
  const auto probs = softmax_lastdim(scores, keys);
  const auto context = permute(matmul(probs, v), {0, 2, 1, 3});
  return linear(reshape(context, {batch, seq, d}), params.output);
}

template <Real T>
Tensor<T> encoder_layer(const Tensor<T>& x, std::span<const std::uint8_t> valid,
                        const BranchConfig& config,
                        const EncoderLayerParams<T>& params,
                        ForwardContext& ctx) {
  const auto attended =
      multi_head_self_attention(x, valid, config.num_heads, params.attention);
  const auto h = layer_norm(
      add(x, dropout(attended, config.dropout_p, ctx.training, ctx.rng)),
      params.attention_norm);
  const auto ffn = linear(gelu(linear(h, params.ffn_in)), params.ffn_out);
  return layer_norm(add(h, dropout(ffn, config.dropout_p, ctx.training, ctx.rng)),
                    params.ffn_norm);
}

template <Real T>
Tensor<T> encode_branch(const TextInput& input, const TextBranch<T>& branch,
                        ForwardContext& ctx) {
  validate_input(input, branch.config);
  auto h = embed_tokens(input, branch.embeddings, branch.config.dropout_p, ctx);
  for (const auto& layer : branch.layers) {
    h = encoder_layer(h, input.valid, branch.config, layer, ctx);
  }
  return h;
}

template <Real T>
Tensor<T> encode_branch(const ImageInput& input, const ImageBranch<T>& branch,
                        ForwardContext& ctx) {
  validate_input(input, branch.config);
  auto h = embed_objects(input, branch.embeddings, branch.config.dropout_p, ctx);
  for (const auto& layer : branch.layers) {
    h = encoder_layer(h, input.valid, branch.config, layer, ctx);
  }
  return h;
}

#define GROUNDING_INSTANTIATE_ENCODER(T)                                        \
  template struct Linear<T>;                                                    \
  template struct LayerNormParams<T>;                                           \
  template struct EncoderLayerParams<T>;                                        \
  template struct TextBranch<T>;                                                \
  template struct ImageBranch<T>;                                               \
  template Tensor<T> linear(const Tensor<T>&, const Linear<T>&);                \
  template Tensor<T> embed_tokens(const TextInput&, const TextEmbeddings<T>&,   \
                                  double, ForwardContext&);                     \
  template Tensor<T> spatial_embed(const Tensor<T>&, const SpatialMLP<T>&);     \
  template Tensor<T> embed_objects(const ImageInput&, const ImageEmbeddings<T>&, \
                                   double, ForwardContext&);                    \
  template Tensor<T> multi_head_self_attention(                                 \
      const Tensor<T>&, std::span<const std::uint8_t>, std::size_t,             \
      const AttentionParams<T>&);                                               \
  template Tensor<T> encoder_layer(const Tensor<T>&,                            \
                                   std::span<const std::uint8_t>,               \
                                   const BranchConfig&,                         \
                                   const EncoderLayerParams<T>&, ForwardContext&); \
  template Tensor<T> encode_branch(const TextInput&, const TextBranch<T>&,      \
                                   ForwardContext&);                            \
  template Tensor<T> encode_branch(const ImageInput&, const ImageBranch<T>&,    \
                                   ForwardContext&);

GROUNDING_INSTANTIATE_ENCODER(float)
GROUNDING_INSTANTIATE_ENCODER(double)

}  // namespace grounding

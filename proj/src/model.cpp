#include "grounding/model.hpp"

#include "grounding/core/errors.hpp"

namespace grounding {

void validate_model_config(const ModelConfig& config) {
  validate_text_config(config.text);
  validate_image_config(config.image);
  if (config.joint_dim == 0) throw ValidationError("joint_dim must be positive");
  if (!(config.init_std > 0.0)) throw ValidationError("init_std must be positive");
  if (!(config.layer_norm_eps > 0.0)) {
    throw ValidationError("layer_norm_eps must be positive");
  }
}

template <Real T>
GroundingModel<T>::GroundingModel(const ModelConfig& config, Rng& rng)
    : config_(config) {
  validate_model_config(config_);
  ParameterFactory<T> factory(params_, rng, config_.init_std);
  text_ = TextBranch<T>::create(config_.text, factory.scoped("text"),
                                config_.layer_norm_eps);
  image_ = ImageBranch<T>::create(config_.image, factory.scoped("image"),
                                  config_.layer_norm_eps);
  head_ = HeadParams<T>::create(factory.scoped("head"), config_.text.hidden_dim,
                                config_.image.hidden_dim, config_.joint_dim);
}

template <Real T>
void GroundingModel<T>::set_image_dropout(double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ValidationError("dropout probability must lie in [0, 1)");
  }
  config_.image.dropout_p = p;
  image_.config.dropout_p = p;
}

template <Real T>
GroundingLogits<T> GroundingModel<T>::forward(const Batch& batch,
                                              ForwardContext& ctx) const {
  const auto text_hidden = encode_branch(batch.text, text_, ctx);
  const auto image_hidden = encode_branch(batch.image, image_, ctx);
  const auto entities = extract_entity_states(text_hidden, batch.entities);
  return cross_modal_logits(entities, image_hidden, batch.image.valid, head_,
                            batch.entities.valid);
}

template <Real T>
Tensor<T> GroundingModel<T>::loss(const Batch& batch, ForwardContext& ctx) const {
  return grounding_loss(forward(batch, ctx), batch.targets);
}

template <Real T>
std::vector<NamedArray> GroundingModel<T>::export_parameters() const {
  std::vector<NamedArray> out;
  out.reserve(params_.size());
  for (const auto& entry : params_.entries()) {
    const auto v = entry.tensor.values();
    out.push_back({entry.name, entry.tensor.shape(),
                   std::vector<float>(v.begin(), v.end())});
  }
  return out;
}

template <Real T>
void GroundingModel<T>::import_parameters(const std::vector<NamedArray>& arrays) {
  auto& entries = params_.entries();
  if (arrays.size() != entries.size()) {
    throw ValidationError("expected " + std::to_string(entries.size()) +
                          " parameters, got " + std::to_string(arrays.size()));
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (arrays[i].name != entries[i].name ||
        arrays[i].shape != entries[i].tensor.shape()) {
      throw ValidationError("parameter " + std::to_string(i) + " is '" +
                            arrays[i].name + "' " + to_string(arrays[i].shape) +
                            ", model expects '" + entries[i].name + "' " +
                            to_string(entries[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    auto dst = entries[i].tensor.mutable_values();
    std::copy(arrays[i].values.begin(), arrays[i].values.end(), dst.begin());
  }
}

template class GroundingModel<float>;
template class GroundingModel<double>;

}  // namespace grounding

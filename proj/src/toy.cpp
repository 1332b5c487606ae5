#include "grounding/toy.hpp"

#include "grounding/core/gradcheck.hpp"
#include "grounding/data/batch.hpp"

namespace grounding {

ModelConfig toy_model_config(std::size_t vocab_size, std::size_t feature_dim) {
  ModelConfig c;
  c.text.num_layers = 2;
  c.text.num_heads = 2;
  c.text.hidden_dim = 8;
  c.text.ffn_dim = 32;
  c.text.dropout_p = 0.1;
  c.text.vocab_size = vocab_size;
  c.text.max_positions = 16;

  c.image.num_layers = 1;
  c.image.num_heads = 2;
  c.image.hidden_dim = 8;
  c.image.ffn_dim = 32;
  c.image.dropout_p = 0.4;
  c.image.feature_dim = feature_dim;
  c.image.use_spatial = true;
  c.image.spatial_hidden = 0;

  c.joint_dim = 8;
  c.init_std = kToyInitStd;
  c.layer_norm_eps = 1e-12;
  return c;
}

ModelConfig overfit_model_config() {
  ModelConfig c = toy_model_config();
  c.text.dropout_p = 0.0;
  c.image.dropout_p = 0.0;
  return c;
}

TrainConfig overfit_train_config() {
  TrainConfig c;
  c.learning_rate = 5e-4;
  c.clip_norm = 0.25;
  c.batch_size = 32;
  c.accumulation_steps = 2;
  c.max_epochs = 200;
  c.patience = 20;
  c.seed = 7;
  c.dropout_p = 0.0;
  return c;
}

SyntheticSpec gradcheck_data_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  s.num_samples = 2;
  s.tokens_per_sample = 6;
  s.objects_per_sample = 4;
  s.entities_per_sample = 3;
  s.max_positives = 1;
  s.d_feat = 32;
  return s;
}

GradcheckSummary run_model_gradcheck(std::uint64_t seed) {
  const SyntheticSpec spec = gradcheck_data_spec(seed);
  const auto records = generate_synthetic(spec);
  const Batch batch = collate_batch(records);

  Rng init(seed);
  GroundingModel<double> model(toy_model_config(spec.vocab_size, spec.d_feat), init);
  const auto f = [&] {
    Rng dropout_rng(seed + 1);
    ForwardContext ctx{.training = true, .rng = &dropout_rng};
    return model.loss(batch, ctx);
  };
  auto tensors = model.parameters().tensors();
  const auto errors = finite_diff_check(f, tensors);

  GradcheckSummary summary;
  const auto& entries = model.parameters().entries();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    summary.per_parameter.emplace_back(entries[i].name, errors[i]);
    if (errors[i] >= summary.max_relative_error) {
      summary.max_relative_error = errors[i];
      summary.worst_parameter = entries[i].name;
    }
  }
  return summary;
}

}  // namespace grounding

#include "grounding/training/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "grounding/core/errors.hpp"
#include "grounding/eval/evaluate.hpp"

namespace grounding {
namespace {

template <Real T>
std::vector<NamedArray> moments_as_arrays(const GroundingModel<T>& model,
                                          const std::vector<std::vector<T>>& moments) {
  const auto& entries = model.parameters().entries();
  if (moments.size() != entries.size()) {
    throw ShapeError("optimizer state does not match the model");
  }
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.push_back({entries[i].name, entries[i].tensor.shape(),
                   std::vector<float>(moments[i].begin(), moments[i].end())});
  }
  return out;
}

template <Real T>
std::vector<std::vector<T>> arrays_as_moments(const GroundingModel<T>& model,
                                              const std::vector<NamedArray>& arrays) {
  const auto& entries = model.parameters().entries();
  if (arrays.size() != entries.size()) {
    throw ValidationError("checkpoint has " + std::to_string(arrays.size()) +
                          " optimizer moments for " +
                          std::to_string(entries.size()) + " parameters");
  }
  std::vector<std::vector<T>> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (arrays[i].name != entries[i].name ||
        arrays[i].shape != entries[i].tensor.shape()) {
      throw ValidationError("optimizer moment '" + arrays[i].name +
                            "' does not match parameter '" + entries[i].name + "'");
    }
    out.emplace_back(arrays[i].values.begin(), arrays[i].values.end());
  }
  return out;
}

}  // namespace

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(c.clip_norm > 0.0)) throw ValidationError("clip_norm must be positive");
  if (c.accumulation_steps == 0) {
    throw ValidationError("accumulation_steps must be at least 1");
  }
  if (c.batch_size == 0 || c.batch_size % c.accumulation_steps != 0) {
    throw ValidationError("batch_size must be a positive multiple of accumulation_steps");
  }
  if (c.max_epochs == 0) throw ValidationError("max_epochs must be positive");
  if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) {
    throw ValidationError("dropout_p must be in [0, 1)");
  }
}

template <Real T>
StepMetrics train_step(std::span<const Batch> micro_batches,
                       GroundingModel<T>& model, AdamState<T>& optimizer,
                       const TrainConfig& config, Rng& rng) {
  if (micro_batches.empty()) throw ValidationError("train_step needs a micro-batch");
  auto& params = model.parameters();
  params.zero_grad();

  double loss_sum = 0.0;
  for (const auto& batch : micro_batches) {
    ForwardContext ctx{.training = true, .rng = &rng};
    const Tensor<T> loss = model.loss(batch, ctx);
    loss_sum += static_cast<double>(loss.item());
    backward(loss);
  }

  auto tensors = params.tensors();
  const T inv = T(1) / static_cast<T>(micro_batches.size());
  for (auto& t : tensors) {
    for (T& g : t.mutable_grad()) g *= inv;
  }
  StepMetrics metrics;
  metrics.loss = loss_sum / static_cast<double>(micro_batches.size());
  metrics.grad_norm = clip_global_norm<T>(tensors, config.clip_norm);
  adam_step<T>(tensors, optimizer, config.learning_rate);
  params.zero_grad();
  return metrics;
}

template <Real T>
OptimizerSnapshot snapshot_optimizer(const GroundingModel<T>& model,
                                     const AdamState<T>& state) {
  OptimizerSnapshot s;
  s.beta1 = state.beta1;
  s.beta2 = state.beta2;
  s.eps = state.eps;
  s.step = state.step;
  s.first_moment = moments_as_arrays(model, state.first_moment);
  s.second_moment = moments_as_arrays(model, state.second_moment);
  return s;
}

template <Real T>
AdamState<T> restore_optimizer(const GroundingModel<T>& model,
                               const OptimizerSnapshot& snapshot) {
  AdamState<T> state;
  state.beta1 = snapshot.beta1;
  state.beta2 = snapshot.beta2;
  state.eps = snapshot.eps;
  state.step = snapshot.step;
  state.first_moment = arrays_as_moments(model, snapshot.first_moment);
  state.second_moment = arrays_as_moments(model, snapshot.second_moment);
  return state;
}

template <Real T>
FitResult fit(std::span<const SampleRecord> train_set,
              std::span<const SampleRecord> dev_set, GroundingModel<T>& model,
              const TrainConfig& config, const FitOptions& options) {
  validate_train_config(config);
  if (train_set.empty() || dev_set.empty()) {
    throw ValidationError("fit needs non-empty train and dev sets");
  }
  if ((options.resume == nullptr) != (options.resume_best == nullptr)) {
    throw ValidationError("resuming needs both the last and the best checkpoint");
  }
  model.set_image_dropout(config.dropout_p);

  Rng rng(config.seed);
  const auto tensors = model.parameters().tensors();
  AdamState<T> optimizer = AdamState<T>::zeros_like(tensors);

  FitResult result;
  Checkpoint state;
  state.model = model.config();
  state.train = config;
  state.rng_state = rng.state();
  if (options.resume != nullptr) {
    const Checkpoint& from = *options.resume;
    if (from.model != model.config()) {
      throw ValidationError("checkpoint model config differs from the model");
    }
    if (from.train != config) {
      throw ValidationError("checkpoint train config differs from the requested one");
    }
    model.import_parameters(from.parameters);
    optimizer = restore_optimizer(model, from.optimizer);
    rng.restore(from.rng_state);
    state = from;
    result.best = *options.resume_best;
  }

  const std::size_t micro = config.micro_batch_size();
  std::vector<std::size_t> order(train_set.size());
  std::vector<SampleRecord> chunk;
  for (std::size_t epoch = state.epoch + 1; epoch <= config.max_epochs; ++epoch) {
    if (state.epochs_without_improvement > config.patience) break;

    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }

    std::vector<Batch> group;
    double loss_sum = 0.0;
    std::size_t micro_count = 0;
    const auto flush = [&] {
      if (group.empty()) return;
      const auto metrics = train_step<T>(group, model, optimizer, config, rng);
      loss_sum += metrics.loss * static_cast<double>(group.size());
      micro_count += group.size();
      group.clear();
    };
    for (std::size_t start = 0; start < order.size(); start += micro) {
      chunk.clear();
      for (std::size_t i = start; i < std::min(start + micro, order.size()); ++i) {
        chunk.push_back(train_set[order[i]]);
      }
      group.push_back(collate_batch(chunk));
      if (group.size() == config.accumulation_steps) flush();
    }
    flush();

    const auto predictions = predict(model, dev_set, micro);
    const EpochRecord record{epoch, loss_sum / static_cast<double>(micro_count),
                             recall_at_k(predictions, 1)};
    const bool improved = record.dev_recall_at_1 > state.best_metric;
    if (improved) {
      state.best_metric = record.dev_recall_at_1;
      state.best_epoch = epoch;
      state.epochs_without_improvement = 0;
    } else {
      ++state.epochs_without_improvement;
    }
    state.epoch = epoch;
    state.history.push_back(record);
    state.rng_state = rng.state();
    state.parameters = model.export_parameters();
    state.optimizer = snapshot_optimizer(model, optimizer);
    if (improved) result.best = state;

    if (options.checkpoint_dir) {
      std::filesystem::create_directories(*options.checkpoint_dir);
      save_checkpoint(state, *options.checkpoint_dir / "last.gckp");
      if (improved) save_checkpoint(state, *options.checkpoint_dir / "best.gckp");
    }
    if (options.on_epoch) options.on_epoch(record);
  }

  result.early_stopped = state.epochs_without_improvement > config.patience;
  result.history = state.history;
  result.last = std::move(state);
  return result;
}

#define GROUNDING_INSTANTIATE_TRAINER(T)                                        \
  template StepMetrics train_step(std::span<const Batch>, GroundingModel<T>&,   \
                                  AdamState<T>&, const TrainConfig&, Rng&);     \
  template OptimizerSnapshot snapshot_optimizer(const GroundingModel<T>&,       \
                                                const AdamState<T>&);           \
  template AdamState<T> restore_optimizer(const GroundingModel<T>&,             \
                                          const OptimizerSnapshot&);            \
  template FitResult fit(std::span<const SampleRecord>,                         \
                         std::span<const SampleRecord>, GroundingModel<T>&,     \
                         const TrainConfig&, const FitOptions&);

GROUNDING_INSTANTIATE_TRAINER(float)
GROUNDING_INSTANTIATE_TRAINER(double)

}  // namespace grounding

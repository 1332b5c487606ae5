#include "grounding/head/grounding_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grounding/core/errors.hpp"
#include "grounding/core/ops.hpp"

namespace grounding {

template <Real T>
HeadParams<T> HeadParams<T>::create(ParameterFactory<T> factory,
                                    std::size_t text_dim, std::size_t image_dim,
                                    std::size_t joint_dim) {
  if (joint_dim == 0) throw ValidationError("joint_dim must be positive");
  return {Linear<T>::create(factory.scoped("query"), text_dim, joint_dim),
          Linear<T>::create(factory.scoped("key"), image_dim, joint_dim),
          joint_dim};
}

template <Real T>
std::size_t GroundingLogits<T>::entity_count() const {
  return static_cast<std::size_t>(
      std::count_if(entity_valid.begin(), entity_valid.end(),
                    [](std::uint8_t v) { return v != 0; }));
}

template <Real T>
Tensor<T> extract_entity_states(const Tensor<T>& text_hidden,
                                std::span<const PhraseSpan> spans) {
  if (text_hidden.rank() != 2) {
    throw ShapeError("expected [seq, d] hidden states, got " +
                     to_string(text_hidden.shape()));
  }
  const std::size_t seq = text_hidden.dim(0);
  std::vector<std::size_t> rows;
  rows.reserve(spans.size());
  for (const auto& span : spans) {
    if (span.first_token > span.last_token || span.last_token >= seq) {
      throw ValidationError("phrase span [" + std::to_string(span.first_token) +
                            ", " + std::to_string(span.last_token) +
                            "] outside sequence of length " + std::to_string(seq));
    }
    rows.push_back(span.last_token);
  }
  return gather_rows(text_hidden, rows);
}

template <Real T>
Tensor<T> extract_entity_states(const Tensor<T>& text_hidden,
                                const EntitySlots& slots) {
  if (text_hidden.rank() != 3 || text_hidden.dim(0) != slots.batch) {
    throw ShapeError("expected [" + std::to_string(slots.batch) +
                     ", seq, d] hidden states, got " +
                     to_string(text_hidden.shape()));
  }
  const std::size_t seq = text_hidden.dim(1);
  const std::size_t d = text_hidden.dim(2);
  std::vector<std::size_t> rows(slots.batch * slots.max_entities);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t b = i / slots.max_entities;
    if (slots.valid[i] != 0 && slots.token[i] >= seq) {
      throw ValidationError("entity token " + std::to_string(slots.token[i]) +
                            " outside sequence of length " + std::to_string(seq));
    }
    rows[i] = b * seq + (slots.valid[i] != 0 ? slots.token[i] : 0);
  }
  const auto flat = reshape(text_hidden, {slots.batch * seq, d});
  return reshape(gather_rows(flat, rows), {slots.batch, slots.max_entities, d});
}

template <Real T>
GroundingLogits<T> cross_modal_logits(const Tensor<T>& entities,
                                      const Tensor<T>& objects,
                                      std::span<const std::uint8_t> object_valid,
                                      const HeadParams<T>& params,
                                      std::span<const std::uint8_t> entity_valid) {
  if (entities.rank() == 2 && objects.rank() == 2) {
    return cross_modal_logits(
        reshape(entities, {1, entities.dim(0), entities.dim(1)}),
        reshape(objects, {1, objects.dim(0), objects.dim(1)}), object_valid,
        params, entity_valid);
  }
  if (entities.rank() != 3 || objects.rank() != 3 ||
      entities.dim(0) != objects.dim(0)) {
    throw ShapeError("cross_modal_logits: entities " + to_string(entities.shape()) +
                     " vs objects " + to_string(objects.shape()));
  }
  GroundingLogits<T> out;
  out.batch = entities.dim(0);
  out.entities = entities.dim(1);
  out.objects = objects.dim(1);
  if (object_valid.size() != out.batch * out.objects) {
    throw ShapeError("object mask has " + std::to_string(object_valid.size()) +
                     " entries for " + to_string(objects.shape()));
  }
  if (!entity_valid.empty() && entity_valid.size() != out.batch * out.entities) {
    throw ShapeError("entity mask has " + std::to_string(entity_valid.size()) +
                     " entries for " + to_string(entities.shape()));
  }
  for (std::size_t b = 0; b < out.batch; ++b) {
    const auto row = object_valid.subspan(b * out.objects, out.objects);
    if (std::none_of(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; })) {
      throw ValidationError("sample " + std::to_string(b) + " has no valid objects");
    }
  }
  out.object_valid.assign(object_valid.begin(), object_valid.end());
  if (entity_valid.empty()) {
    out.entity_valid.assign(out.batch * out.entities, 1);
  } else {
    out.entity_valid.assign(entity_valid.begin(), entity_valid.end());
  }

  const auto q = linear(entities, params.query);
  const auto k = linear(objects, params.key);
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(params.joint_dim));
  out.scores = scale(matmul(q, transpose_last2(k)), inv_sqrt);
  return out;
}

template <Real T>
Tensor<T> grounding_loss(const GroundingLogits<T>& logits,
                         std::span<const std::uint8_t> targets) {
  const std::size_t B = logits.batch;
  const std::size_t E = logits.entities;
  const std::size_t O = logits.objects;
  if (targets.size() != B * E * O) {
    throw ShapeError("grounding_loss: " + std::to_string(targets.size()) +
                     " targets for a [" + std::to_string(B) + ", " +
                     std::to_string(E) + ", " + std::to_string(O) + "] score tensor");
  }
  const std::size_t total_entities = logits.entity_count();
  if (total_entities == 0) throw ValidationError("grounding_loss: no valid entities");

  Mask pairs{{B, E, O}, std::vector<std::uint8_t>(B * E * O, 0)};
  std::vector<T> weights(B * E * O, T{0});
  std::vector<T> target_values(B * E * O, T{0});
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t valid_objects = 0;
    for (std::size_t o = 0; o < O; ++o) valid_objects += logits.object_valid[b * O + o] != 0;
    const T weight = T{1} / static_cast<T>(valid_objects * total_entities);
    for (std::size_t e = 0; e < E; ++e) {
      if (logits.entity_valid[b * E + e] == 0) continue;
      for (std::size_t o = 0; o < O; ++o) {
        if (logits.object_valid[b * O + o] == 0) continue;
        const std::size_t i = (b * E + e) * O + o;
        pairs.valid[i] = 1;
        weights[i] = weight;
        target_values[i] = targets[i] != 0 ? T{1} : T{0};
      }
    }
  }
  const auto per_pair = bce_with_logits(
      logits.scores, Tensor<T>::from({B, E, O}, std::move(target_values)), pairs);
  return sum(mul(per_pair, Tensor<T>::from({B, E, O}, std::move(weights))));
}

template <Real T>
std::vector<std::size_t> rank_objects(const GroundingLogits<T>& logits,
                                      std::size_t b, std::size_t entity) {
  if (b >= logits.batch || entity >= logits.entities) {
    throw ValidationError("rank_objects: entity index out of range");
  }
  std::vector<std::size_t> order;
  for (std::size_t o = 0; o < logits.objects; ++o) {
    if (logits.object_valid[b * logits.objects + o] != 0) order.push_back(o);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return logits.score(b, entity, x) > logits.score(b, entity, y);
  });
  return order;
}

#define GROUNDING_INSTANTIATE_HEAD(T)                                           \
  template struct HeadParams<T>;                                                \
  template struct GroundingLogits<T>;                                           \
  template Tensor<T> extract_entity_states(const Tensor<T>&,                    \
                                           std::span<const PhraseSpan>);        \
  template Tensor<T> extract_entity_states(const Tensor<T>&, const EntitySlots&); \
  template GroundingLogits<T> cross_modal_logits(                               \
      const Tensor<T>&, const Tensor<T>&, std::span<const std::uint8_t>,        \
      const HeadParams<T>&, std::span<const std::uint8_t>);                     \
  template Tensor<T> grounding_loss(const GroundingLogits<T>&,                  \
                                    std::span<const std::uint8_t>);             \
  template std::vector<std::size_t> rank_objects(const GroundingLogits<T>&,     \
                                                 std::size_t, std::size_t);

GROUNDING_INSTANTIATE_HEAD(float)
GROUNDING_INSTANTIATE_HEAD(double)

}  // namespace grounding

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "grounding/core/parameters.hpp"
#include "grounding/core/tensor.hpp"
#include "grounding/data/entity.hpp"
#include "grounding/encoder/encoder.hpp"

namespace grounding {

// Text position standing in for each entity, padded to the largest entity
// count in the batch.
struct EntitySlots {
  std::size_t batch = 0;
  std::size_t max_entities = 0;
  std::vector<std::size_t> token;    // [batch * max_entities]
  std::vector<std::uint8_t> valid;   // [batch * max_entities]
};

// Query projection for text entities and key projection for image objects,
// both into a shared joint space.
template <Real T>
struct HeadParams {
  Linear<T> query;  // d_text -> d_joint
  Linear<T> key;    // d_image -> d_joint
  std::size_t joint_dim = 0;

  static HeadParams create(ParameterFactory<T> factory, std::size_t text_dim,
                           std::size_t image_dim, std::size_t joint_dim);
};

// Entity x object scores of one batch. Columns of padded objects and rows of
// padded entities hold finite filler that loss and ranking never read.
template <Real T>
struct GroundingLogits {
  Tensor<T> scores;  // [batch, entities, objects]
  std::size_t batch = 0;
  std::size_t entities = 0;
  std::size_t objects = 0;
  std::vector<std::uint8_t> entity_valid;  // [batch * entities]
  std::vector<std::uint8_t> object_valid;  // [batch * objects]

  std::size_t entity_count() const;
  T score(std::size_t b, std::size_t e, std::size_t o) const {
    return scores.values()[(b * entities + e) * objects + o];
  }
};

// Row i is text_hidden[spans[i].last_token]: an entity is represented by the
// last token of its phrase.
template <Real T>
Tensor<T> extract_entity_states(const Tensor<T>& text_hidden,
                                std::span<const PhraseSpan> spans);

// Batched form over [batch, seq, d] hidden states; [batch, max_entities, d].
template <Real T>
Tensor<T> extract_entity_states(const Tensor<T>& text_hidden,
                                const EntitySlots& slots);

// scores[e, o] = Q(entity_e) . K(object_o) / sqrt(d_joint). Accepts
// [E, d]/[O, d] or batched [B, E, d]/[B, O, d]. An empty entity mask means
// every entity is valid.
template <Real T>
GroundingLogits<T> cross_modal_logits(const Tensor<T>& entities,
                                      const Tensor<T>& objects,
                                      std::span<const std::uint8_t> object_valid,
                                      const HeadParams<T>& params,
                                      std::span<const std::uint8_t> entity_valid = {});

// Mean over entities of the mean BCE over that entity's valid objects.
// `targets` is [batch * entities * objects] of 0/1; an entity may have any
// number of positives, including none.
template <Real T>
Tensor<T> grounding_loss(const GroundingLogits<T>& logits,
                         std::span<const std::uint8_t> targets);

// Valid objects by descending score, ties by ascending index.
template <Real T>
std::vector<std::size_t> rank_objects(const GroundingLogits<T>& logits,
                                      std::size_t b, std::size_t entity);
template <Real T>
std::vector<std::size_t> rank_objects(const GroundingLogits<T>& logits,
                                      std::size_t entity) {
  return rank_objects(logits, 0, entity);
}

}  // namespace grounding

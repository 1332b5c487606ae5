#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "grounding/data/record.hpp"

namespace grounding {

// Desk-scale dataset with a planted text-to-object correspondence.
//
// Token ids below num_concepts are concept words, each tied to a prototype
// feature vector; the rest are filler. Every entity is one concept word
// (the last token of its phrase). Its positive objects carry the concept's
// prototype plus Gaussian noise and ground-truth boxes overlapping them with
// IoU >= 0.5; distractors carry prototypes of concepts absent from the
// caption. Objects occupy disjoint grid cells, so no distractor overlaps a
// ground-truth box.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t num_samples = 64;
  std::size_t vocab_size = 50;
  std::size_t tokens_per_sample = 6;
  std::size_t objects_per_sample = 8;
  std::size_t entities_per_sample = 2;
  std::size_t d_feat = 32;
  std::size_t num_concepts = 8;
  std::size_t max_positives = 2;
  double noise_scale = 0.1;
  int image_width = 640;
  int image_height = 480;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

void validate_spec(const SyntheticSpec& spec);

// Prototype feature vector of every concept, [num_concepts][d_feat].
std::vector<std::vector<float>> concept_prototypes(const SyntheticSpec& spec);

std::vector<SampleRecord> generate_synthetic(const SyntheticSpec& spec);

}  // namespace grounding

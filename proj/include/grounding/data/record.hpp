#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "grounding/data/box.hpp"
#include "grounding/data/entity.hpp"

namespace grounding {

// Row-major [rows, cols] matrix of 32-bit RoI features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

// One caption-image pair.
struct SampleRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<std::size_t> token_ids;
  std::vector<PhraseSpan> phrases;
  std::vector<Box> proposals;
  FeatureMatrix features;
  // Where the features came from when they were not inline. Informational;
  // not part of record equality.
  std::optional<std::filesystem::path> feature_path;

  friend bool operator==(const SampleRecord& a, const SampleRecord& b) {
    return a.image_id == b.image_id && a.width == b.width &&
           a.height == b.height && a.token_ids == b.token_ids &&
           a.phrases == b.phrases && a.proposals == b.proposals &&
           a.features == b.features;
  }
};

// Throws ValidationError naming the image on the first violated invariant:
// positive image size, non-empty tokens, spans in range with at least one
// gt box inside the image, proposals inside the image, one feature row per
// proposal.
void validate_record(const SampleRecord& record);

}  // namespace grounding

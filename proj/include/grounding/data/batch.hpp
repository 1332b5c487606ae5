#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grounding/data/record.hpp"
#include "grounding/encoder/encoder.hpp"
#include "grounding/head/grounding_head.hpp"

namespace grounding {

struct LabelerParams {
  double iou_threshold = kDefaultIouThreshold;
};

// Records padded to the per-batch maxima of tokens, objects and entities.
// Padding is zero (token id 0, zero features, empty boxes) and the masks
// delimit exactly the original extents.
struct Batch {
  TextInput text;
  ImageInput image;
  EntitySlots entities;
  std::vector<std::uint8_t> targets;  // [batch * max_entities * num_objects]

  std::vector<std::string> image_ids;
  std::vector<PhraseSpan> phrases;          // flattened, sample-major
  std::vector<std::size_t> phrase_offsets;  // sample b owns [off[b], off[b+1])

  std::size_t size() const { return text.batch; }
  std::uint8_t target(std::size_t b, std::size_t e, std::size_t o) const {
    return targets[(b * entities.max_entities + e) * image.num_objects + o];
  }
};

Batch collate_batch(std::span<const SampleRecord> records,
                    const LabelerParams& labeler = {});

// Unpadded record b of the batch (features, boxes, tokens and phrases).
SampleRecord slice_sample(const Batch& batch, std::size_t b);

}  // namespace grounding

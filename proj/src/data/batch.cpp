#include "grounding/data/batch.hpp"

#include <algorithm>

#include "grounding/core/errors.hpp"

namespace grounding {

Batch collate_batch(std::span<const SampleRecord> records,
                    const LabelerParams& labeler) {
  if (records.empty()) throw ValidationError("collate_batch: no records");
  const std::size_t B = records.size();
  std::size_t seq = 0;
  std::size_t objects = 0;
  std::size_t entities = 1;
  const std::size_t feature_dim = records.front().features.cols;
  for (const auto& r : records) {
    validate_record(r);
    if (r.features.cols != feature_dim) {
      throw ValidationError("record '" + r.image_id + "' has feature dimension " +
                            std::to_string(r.features.cols) + ", batch uses " +
                            std::to_string(feature_dim));
    }
    seq = std::max(seq, r.token_ids.size());
    objects = std::max(objects, r.proposals.size());
    entities = std::max(entities, r.phrases.size());
  }

  Batch batch;
  batch.text.batch = B;
  batch.text.seq_len = seq;
  batch.text.token_ids.assign(B * seq, 0);
  batch.text.valid.assign(B * seq, 0);

  auto& image = batch.image;
  image.batch = B;
  image.num_objects = objects;
  image.feature_dim = feature_dim;
  image.features.assign(B * objects * feature_dim, 0.0f);
  image.boxes.assign(B * objects, Box{});
  image.valid.assign(B * objects, 0);

  batch.entities.batch = B;
  batch.entities.max_entities = entities;
  batch.entities.token.assign(B * entities, 0);
  batch.entities.valid.assign(B * entities, 0);
  batch.targets.assign(B * entities * objects, 0);
  batch.phrase_offsets.push_back(0);

  for (std::size_t b = 0; b < B; ++b) {
    const auto& r = records[b];
    batch.image_ids.push_back(r.image_id);
    std::copy(r.token_ids.begin(), r.token_ids.end(),
              batch.text.token_ids.begin() + b * seq);
    std::fill_n(batch.text.valid.begin() + b * seq, r.token_ids.size(), 1);

    image.image_width.push_back(r.width);
    image.image_height.push_back(r.height);
    std::copy(r.features.values.begin(), r.features.values.end(),
              image.features.begin() + b * objects * feature_dim);
    std::copy(r.proposals.begin(), r.proposals.end(), image.boxes.begin() + b * objects);
    std::fill_n(image.valid.begin() + b * objects, r.proposals.size(), 1);

    for (std::size_t e = 0; e < r.phrases.size(); ++e) {
      const auto& phrase = r.phrases[e];
      batch.entities.token[b * entities + e] = phrase.last_token;
      batch.entities.valid[b * entities + e] = 1;
      const auto labels = label_positives(r.proposals, phrase.gt_boxes,
                                          labeler.iou_threshold);
      std::copy(labels.begin(), labels.end(),
                batch.targets.begin() + (b * entities + e) * objects);
      batch.phrases.push_back(phrase);
    }
    batch.phrase_offsets.push_back(batch.phrases.size());
  }
  return batch;
}

SampleRecord slice_sample(const Batch& batch, std::size_t b) {
  if (b >= batch.size()) throw ValidationError("slice_sample: index out of range");
  SampleRecord r;
  r.image_id = batch.image_ids[b];
  r.width = static_cast<int>(batch.image.image_width[b]);
  r.height = static_cast<int>(batch.image.image_height[b]);

  const std::size_t seq = batch.text.seq_len;
  for (std::size_t t = 0; t < seq; ++t) {
    if (batch.text.valid[b * seq + t] != 0) {
      r.token_ids.push_back(batch.text.token_ids[b * seq + t]);
    }
  }
  const std::size_t objects = batch.image.num_objects;
  const std::size_t dim = batch.image.feature_dim;
  r.features.cols = dim;
  for (std::size_t o = 0; o < objects; ++o) {
    if (batch.image.valid[b * objects + o] == 0) continue;
    r.proposals.push_back(batch.image.boxes[b * objects + o]);
    const auto row = batch.image.features.begin() + (b * objects + o) * dim;
    r.features.values.insert(r.features.values.end(), row, row + dim);
    ++r.features.rows;
  }
  r.phrases.assign(batch.phrases.begin() + batch.phrase_offsets[b],
                   batch.phrases.begin() + batch.phrase_offsets[b + 1]);
  return r;
}

}  // namespace grounding

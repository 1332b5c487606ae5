#include "grounding/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "grounding/core/errors.hpp"
#include "grounding/core/rng.hpp"

namespace grounding {
namespace {

template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

// Random box inside a grid cell covering at least 60% of each side.
Box box_in_cell(double cx, double cy, double cw, double ch, Rng& rng) {
  const double x1 = std::floor(cx + 0.2 * cw * rng.uniform());
  const double y1 = std::floor(cy + 0.2 * ch * rng.uniform());
  const double x2 = std::ceil(cx + cw - 0.2 * cw * rng.uniform());
  const double y2 = std::ceil(cy + ch - 0.2 * ch * rng.uniform());
  return {x1, y1, std::min(x2, cx + cw), std::min(y2, cy + ch)};
}

// Ground-truth box near `proposal`, clamped to its cell, IoU >= 0.5.
Box jittered_gt(const Box& proposal, double cx, double cy, double cw, double ch,
                Rng& rng) {
  const auto shift = [&](double extent) {
    return std::round((rng.uniform() * 2.0 - 1.0) * 0.1 * extent);
  };
  Box gt{proposal.x1 + shift(proposal.width()), proposal.y1 + shift(proposal.height()),
         proposal.x2 + shift(proposal.width()), proposal.y2 + shift(proposal.height())};
  gt.x1 = std::clamp(gt.x1, cx, cx + cw - 1);
  gt.y1 = std::clamp(gt.y1, cy, cy + ch - 1);
  gt.x2 = std::clamp(gt.x2, gt.x1 + 1, cx + cw);
  gt.y2 = std::clamp(gt.y2, gt.y1 + 1, cy + ch);
  return iou(gt, proposal) >= kDefaultIouThreshold ? gt : proposal;
}

}  // namespace

void validate_spec(const SyntheticSpec& s) {
  const auto fail = [](const std::string& what) {
    throw ValidationError("synthetic spec: " + what);
  };
  if (s.num_samples == 0 || s.tokens_per_sample == 0 || s.objects_per_sample == 0 ||
      s.entities_per_sample == 0 || s.d_feat == 0 || s.max_positives == 0) {
    fail("counts must be positive");
  }
  if (s.entities_per_sample > s.tokens_per_sample) {
    fail("entities_per_sample exceeds tokens_per_sample");
  }
  if (s.entities_per_sample > s.objects_per_sample) {
    fail("every entity needs at least one object");
  }
  if (s.num_concepts <= s.entities_per_sample) {
    fail("num_concepts must exceed entities_per_sample so distractors exist");
  }
  if (s.num_concepts >= s.vocab_size) fail("vocab_size must leave filler tokens");
  if (!(s.noise_scale >= 0.0)) fail("noise_scale must be non-negative");
  const auto cols = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(s.objects_per_sample))));
  const std::size_t rows = (s.objects_per_sample + cols - 1) / cols;
  if (s.image_width < static_cast<int>(4 * cols) ||
      s.image_height < static_cast<int>(4 * rows)) {
    fail("image too small for the object grid");
  }
}

std::vector<std::vector<float>> concept_prototypes(const SyntheticSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  std::vector<std::vector<float>> prototypes(spec.num_concepts,
                                             std::vector<float>(spec.d_feat));
  for (auto& p : prototypes) {
    for (float& v : p) v = static_cast<float>(rng.normal());
  }
  return prototypes;
}

std::vector<SampleRecord> generate_synthetic(const SyntheticSpec& spec) {
  const auto prototypes = concept_prototypes(spec);
  // Samples draw from a stream separate from the prototypes.
  Rng rng(spec.seed ^ 0x5eedf00dULL);

  const std::size_t T = spec.tokens_per_sample;
  const std::size_t O = spec.objects_per_sample;
  const std::size_t E = spec.entities_per_sample;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(O))));
  const std::size_t grid_rows = (O + cols - 1) / cols;
  const double cw = std::floor(static_cast<double>(spec.image_width) / cols);
  const double ch = std::floor(static_cast<double>(spec.image_height) / grid_rows);

  std::vector<SampleRecord> records;
  records.reserve(spec.num_samples);
  for (std::size_t n = 0; n < spec.num_samples; ++n) {
    SampleRecord r;
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%06zu", n);
    r.image_id = id;
    r.width = spec.image_width;
    r.height = spec.image_height;

    std::vector<std::size_t> concepts(spec.num_concepts);
    std::iota(concepts.begin(), concepts.end(), 0);
    shuffle(concepts, rng);
    const std::vector<std::size_t> present(concepts.begin(), concepts.begin() + E);
    const std::vector<std::size_t> absent(concepts.begin() + E, concepts.end());

    std::vector<std::size_t> positions(T);
    std::iota(positions.begin(), positions.end(), 0);
    shuffle(positions, rng);
    std::vector<std::size_t> entity_pos(positions.begin(), positions.begin() + E);
    std::sort(entity_pos.begin(), entity_pos.end());

    r.token_ids.resize(T);
    for (auto& t : r.token_ids) {
      t = spec.num_concepts + rng.below(spec.vocab_size - spec.num_concepts);
    }

    std::vector<std::size_t> cells(cols * grid_rows);
    std::iota(cells.begin(), cells.end(), 0);
    shuffle(cells, rng);
    r.proposals.resize(O);
    std::vector<bool> assigned(O, false);
    std::size_t next_object = 0;
    r.features.rows = O;
    r.features.cols = spec.d_feat;
    r.features.values.assign(O * spec.d_feat, 0.0f);
    const auto place = [&](std::size_t o, std::size_t concept_id) {
      const double cx = static_cast<double>(cells[o] % cols) * cw;
      const double cy = static_cast<double>(cells[o] / cols) * ch;
      r.proposals[o] = box_in_cell(cx, cy, cw, ch, rng);
      for (std::size_t c = 0; c < spec.d_feat; ++c) {
        const double noise = spec.noise_scale == 0.0 ? 0.0 : spec.noise_scale * rng.normal();
        r.features.values[o * spec.d_feat + c] =
            static_cast<float>(prototypes[concept_id][c] + noise);
      }
      assigned[o] = true;
    };

    for (std::size_t e = 0; e < E; ++e) {
      const std::size_t last = entity_pos[e];
      const std::size_t concept_id = present[e];
      r.token_ids[last] = concept_id;
      PhraseSpan span;
      span.last_token = last;
      span.first_token = last;
      const bool prev_free =
          last > 0 && std::find(entity_pos.begin(), entity_pos.end(), last - 1) ==
                          entity_pos.end();
      if (prev_free && rng.uniform() < 0.5) span.first_token = last - 1;
      span.type = kAllEntityTypes[concept_id % kAllEntityTypes.size()];

      // Leave at least one object for each entity still to come.
      const std::size_t budget = O - next_object - (E - e - 1);
      const std::size_t positives =
          std::min<std::size_t>(1 + rng.below(spec.max_positives), budget);
      for (std::size_t k = 0; k < positives; ++k) {
        const std::size_t o = next_object++;
        place(o, concept_id);
        const double cx = static_cast<double>(cells[o] % cols) * cw;
        const double cy = static_cast<double>(cells[o] / cols) * ch;
        span.gt_boxes.push_back(jittered_gt(r.proposals[o], cx, cy, cw, ch, rng));
      }
      r.phrases.push_back(std::move(span));
    }
    for (std::size_t o = 0; o < O; ++o) {
      if (!assigned[o]) place(o, absent[rng.below(absent.size())]);
    }

    // Shuffle object order so positives are not always first.
    std::vector<std::size_t> order(O);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    std::vector<Box> boxes(O);
    std::vector<float> features(O * spec.d_feat);
    for (std::size_t i = 0; i < O; ++i) {
      boxes[i] = r.proposals[order[i]];
      std::copy_n(r.features.values.begin() + order[i] * spec.d_feat, spec.d_feat,
                  features.begin() + i * spec.d_feat);
    }
    r.proposals = std::move(boxes);
    r.features.values = std::move(features);

    validate_record(r);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace grounding

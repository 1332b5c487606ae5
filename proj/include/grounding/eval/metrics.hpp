#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "grounding/data/box.hpp"
#include "grounding/data/entity.hpp"

namespace grounding {

// Model output for one entity occurrence: its proposals in ranked order
// plus what is needed to score the ranking.
struct EntityPrediction {
  std::vector<std::size_t> ranking;  // proposal indices, best first
  std::vector<Box> proposals;
  std::vector<Box> gt_boxes;
  EntityType type = EntityType::kOther;
};

// True iff one of the first k ranked proposals reaches `threshold` IoU with
// any gt box. k larger than the ranking looks at the whole ranking.
bool entity_hit(std::span<const std::size_t> ranking,
                std::span<const Box> proposals, std::span<const Box> gt_boxes,
                std::size_t k, double threshold = kDefaultIouThreshold);

// Percent of entities hit in the top k. Entities with no qualifying
// proposal count as misses. Throws ValidationError on an empty split or
// k == 0.
double recall_at_k(std::span<const EntityPrediction> predictions, std::size_t k,
                   double threshold = kDefaultIouThreshold);

// Percent of entities with any qualifying proposal at any rank.
double upper_bound(std::span<const EntityPrediction> predictions,
                   double threshold = kDefaultIouThreshold);

struct TypeRecall {
  double recall_at_1 = 0.0;
  std::size_t count = 0;

  friend bool operator==(const TypeRecall&, const TypeRecall&) = default;
};

// Indexed like kAllEntityTypes; a type with no entities reports 0 / 0.
using TypeBreakdown = std::array<TypeRecall, kAllEntityTypes.size()>;

TypeBreakdown per_type_breakdown(std::span<const EntityPrediction> predictions,
                                 double threshold = kDefaultIouThreshold);

}  // namespace grounding

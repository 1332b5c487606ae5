#include "grounding/eval/metrics.hpp"

#include <algorithm>

#include "grounding/core/errors.hpp"

namespace grounding {
namespace {

bool qualifies(const Box& proposal, std::span<const Box> gt_boxes,
               double threshold) {
  return std::any_of(gt_boxes.begin(), gt_boxes.end(), [&](const Box& gt) {
    return iou(proposal, gt) >= threshold;
  });
}

void require_nonempty(std::span<const EntityPrediction> predictions) {
  if (predictions.empty()) throw ValidationError("cannot score an empty split");
}

}  // namespace

bool entity_hit(std::span<const std::size_t> ranking,
                std::span<const Box> proposals, std::span<const Box> gt_boxes,
                std::size_t k, double threshold) {
  const std::size_t top = std::min(k, ranking.size());
  for (std::size_t r = 0; r < top; ++r) {
    if (ranking[r] >= proposals.size()) {
      throw ValidationError("ranking refers to proposal " +
                            std::to_string(ranking[r]) + " of " +
                            std::to_string(proposals.size()));
    }
    if (qualifies(proposals[ranking[r]], gt_boxes, threshold)) return true;
  }
  return false;
}

double recall_at_k(std::span<const EntityPrediction> predictions, std::size_t k,
                   double threshold) {
  require_nonempty(predictions);
  if (k == 0) throw ValidationError("recall@k needs k >= 1");
  std::size_t hits = 0;
  for (const auto& p : predictions) {
    hits += entity_hit(p.ranking, p.proposals, p.gt_boxes, k, threshold);
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(predictions.size());
}

double upper_bound(std::span<const EntityPrediction> predictions,
                   double threshold) {
  require_nonempty(predictions);
  std::size_t reachable = 0;
  for (const auto& p : predictions) {
    reachable += std::any_of(p.proposals.begin(), p.proposals.end(),
                             [&](const Box& b) {
                               return qualifies(b, p.gt_boxes, threshold);
                             });
  }
  return 100.0 * static_cast<double>(reachable) /
         static_cast<double>(predictions.size());
}

TypeBreakdown per_type_breakdown(std::span<const EntityPrediction> predictions,
                                 double threshold) {
  TypeBreakdown out{};
  std::array<std::size_t, kAllEntityTypes.size()> hits{};
  for (const auto& p : predictions) {
    const auto t = static_cast<std::size_t>(p.type);
    if (t >= out.size()) throw ValidationError("entity type out of range");
    ++out[t].count;
    hits[t] += entity_hit(p.ranking, p.proposals, p.gt_boxes, 1, threshold);
  }
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t].count > 0) {
      out[t].recall_at_1 = 100.0 * static_cast<double>(hits[t]) /
                           static_cast<double>(out[t].count);
    }
  }
  return out;
}

}  // namespace grounding

#include "grounding/data/record.hpp"

#include "grounding/core/errors.hpp"

namespace grounding {

void validate_record(const SampleRecord& r) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("record '" + r.image_id + "': " + what);
  };
  if (r.width <= 0 || r.height <= 0) fail("image size must be positive");
  if (r.token_ids.empty()) fail("no tokens");
  if (r.proposals.empty()) fail("no proposals");
  for (std::size_t i = 0; i < r.phrases.size(); ++i) {
    const auto& p = r.phrases[i];
    if (p.first_token > p.last_token || p.last_token >= r.token_ids.size()) {
      fail("phrase " + std::to_string(i) + " span [" +
           std::to_string(p.first_token) + ", " + std::to_string(p.last_token) +
           "] outside " + std::to_string(r.token_ids.size()) + " tokens");
    }
    if (p.gt_boxes.empty()) fail("phrase " + std::to_string(i) + " has no gt boxes");
    for (const auto& box : p.gt_boxes) {
      try {
        require_within(box, r.width, r.height);
      } catch (const ValidationError& e) {
        fail(std::string("phrase ") + std::to_string(i) + ": " + e.what());
      }
    }
  }
  for (const auto& box : r.proposals) {
    try {
      require_within(box, r.width, r.height);
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }
  if (r.features.rows != r.proposals.size()) {
    fail(std::to_string(r.features.rows) + " feature rows for " +
         std::to_string(r.proposals.size()) + " proposals");
  }
  if (r.features.values.size() != r.features.rows * r.features.cols) {
    fail("feature matrix payload does not match its shape");
  }
}

}  // namespace grounding

#include "grounding/data/box.hpp"

#include <algorithm>
#include <sstream>

#include "grounding/core/errors.hpp"

namespace grounding {

std::string to_string(const Box& box) {
  std::ostringstream out;
  out << '(' << box.x1 << ", " << box.y1 << ", " << box.x2 << ", " << box.y2
      << ')';
  return out.str();
}

void require_nondegenerate(const Box& box) {
  if (!(box.x2 > box.x1) || !(box.y2 > box.y1)) {
    throw ValidationError("degenerate box " + to_string(box));
  }
}

void require_within(const Box& box, double width, double height) {
  require_nondegenerate(box);
  if (box.x1 < 0 || box.y1 < 0 || box.x2 > width || box.y2 > height) {
    std::ostringstream msg;
    msg << "box " << to_string(box) << " outside image " << width << 'x'
        << height;
    throw ValidationError(msg.str());
  }
}

double iou(const Box& a, const Box& b) {
  require_nondegenerate(a);
  require_nondegenerate(b);
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::uint8_t> label_positives(std::span<const Box> proposals,
                                          std::span<const Box> gt_boxes,
                                          double threshold) {
  if (proposals.empty()) throw ValidationError("label_positives: no proposals");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("IoU threshold must lie in (0, 1]");
  }
  std::vector<std::uint8_t> labels(proposals.size(), 0);
  for (std::size_t o = 0; o < proposals.size(); ++o) {
    for (const Box& gt : gt_boxes) {
      if (iou(proposals[o], gt) >= threshold) {
        labels[o] = 1;
        break;
      }
    }
  }
  return labels;
}

}  // namespace grounding

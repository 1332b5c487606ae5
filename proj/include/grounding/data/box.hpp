#pragma once

#include <span>
#include <string>
#include <vector>
#include <cstdint>

namespace grounding {

// Corner-form pixel rectangle with continuous coordinates; area is
// (x2 - x1) * (y2 - y1).
struct Box {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  friend bool operator==(const Box&, const Box&) = default;
};

std::string to_string(const Box& box);

// Throws ValidationError if x2 <= x1 or y2 <= y1.
void require_nondegenerate(const Box& box);
// Also requires 0 <= x1 < x2 <= width and 0 <= y1 < y2 <= height.
void require_within(const Box& box, double width, double height);

// Intersection over union; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

inline constexpr double kDefaultIouThreshold = 0.5;

// Proposal o is positive iff max over gt of iou(proposal_o, gt) >= threshold.
std::vector<std::uint8_t> label_positives(std::span<const Box> proposals,
                                          std::span<const Box> gt_boxes,
                                          double threshold = kDefaultIouThreshold);

}  // namespace grounding

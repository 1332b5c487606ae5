#pragma once

#include <array>
#include <cstddef>

#include "grounding/data/entity.hpp"

// Full-scale Flickr30K Entities results of the L1-H2-abs configuration
// (pretrained text branch, Bottom-Up proposals). Not reproducible at desk
// scale; kept as reference values for report formatting and documentation.
namespace grounding::reference {

struct SplitResult {
  double recall_at_1;
  double recall_at_5;
  double recall_at_10;
  double upper_bound;
};

inline constexpr SplitResult kTest{71.36, 84.76, 86.49, 87.45};
inline constexpr SplitResult kDev{69.8, 84.22, 86.21, 86.97};

// Test-split recall@1 and instance counts, ordered like kAllEntityTypes.
inline constexpr std::array<double, 8> kTestTypeRecallAt1{
    81.95, 76.5, 46.27, 82.05, 79.0, 35.8, 70.23, 53.53};
inline constexpr std::array<std::size_t, 8> kTestTypeCounts{
    5656, 2306, 523, 518, 400, 162, 1619, 3374};

}  // namespace grounding::reference

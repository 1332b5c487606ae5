#pragma once

#include <filesystem>

#include "grounding/data/record.hpp"

namespace grounding {

// GRND layout, little-endian throughout:
//   "GRND" | u8 version = 1 | u32 rows | u32 cols | rows*cols f32, row-major
inline constexpr unsigned char kFeatureFileVersion = 1;

void save_feature_file(const FeatureMatrix& matrix,
                       const std::filesystem::path& path);
FeatureMatrix load_feature_file(const std::filesystem::path& path);

}  // namespace grounding

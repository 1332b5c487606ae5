#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "grounding/data/record.hpp"

namespace grounding {

// JSONL annotations, one record per line:
//   {"image_id", "width", "height", "tokens": [int],
//    "phrases": [{"first", "last", "type", "gt_boxes": [[x1,y1,x2,y2]]}],
//    "boxes": [[x1,y1,x2,y2]], "features": "<path>" | [[f32]]}
// Relative feature paths resolve against the annotation file's directory.
// Fails on the first bad line with its line number.
std::vector<SampleRecord> parse_dataset(const std::filesystem::path& path);

enum class FeatureStorage {
  kInline,  // features embedded as nested arrays
  kFiles,   // one GRND file per record under features/<image_id>.grnd
};

void write_dataset(const std::vector<SampleRecord>& records,
                   const std::filesystem::path& path, FeatureStorage storage);

}  // namespace grounding

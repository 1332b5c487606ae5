#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "grounding/data/box.hpp"

namespace grounding {

// The eight Flickr30K Entities phrase categories, in their reporting order.
enum class EntityType {
  kPeople,
  kClothing,
  kBodyParts,
  kAnimals,
  kVehicles,
  kInstruments,
  kScene,
  kOther,
};

inline constexpr std::array<EntityType, 8> kAllEntityTypes = {
    EntityType::kPeople,   EntityType::kClothing,    EntityType::kBodyParts,
    EntityType::kAnimals,  EntityType::kVehicles,    EntityType::kInstruments,
    EntityType::kScene,    EntityType::kOther,
};

std::string_view to_string(EntityType type);
// Throws ValidationError for anything outside the eight tags.
EntityType parse_entity_type(std::string_view name);

// A phrase in a caption: tokens [first_token, last_token] inclusive.
struct PhraseSpan {
  std::size_t first_token = 0;
  std::size_t last_token = 0;
  EntityType type = EntityType::kOther;
  std::vector<Box> gt_boxes;

  friend bool operator==(const PhraseSpan&, const PhraseSpan&) = default;
};

}  // namespace grounding

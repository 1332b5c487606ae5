#include "grounding/data/entity.hpp"

#include "grounding/core/errors.hpp"

namespace grounding {

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::kPeople: return "people";
    case EntityType::kClothing: return "clothing";
    case EntityType::kBodyParts: return "bodyparts";
    case EntityType::kAnimals: return "animals";
    case EntityType::kVehicles: return "vehicles";
    case EntityType::kInstruments: return "instruments";
    case EntityType::kScene: return "scene";
    case EntityType::kOther: return "other";
  }
  return "other";
}

EntityType parse_entity_type(std::string_view name) {
  for (EntityType type : kAllEntityTypes) {
    if (to_string(type) == name) return type;
  }
  throw ValidationError("unknown entity type '" + std::string(name) + "'");
}

}  // namespace grounding

#pragma once

#include <compare>
#include <cstddef>
#include <functional>

#include "ookb/vocabulary.hpp"

namespace ookb {

struct Triplet {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct LabeledTriplet {
  Triplet triplet;
  bool positive = true;

  friend bool operator==(const LabeledTriplet&, const LabeledTriplet&) = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept {
    std::size_t h = std::hash<std::int64_t>{}((static_cast<std::int64_t>(t.head) << 32) ^ t.tail);
    return h ^ (std::hash<std::int32_t>{}(t.relation) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

}  // namespace ookb

#pragma once

#include <set>
#include <span>
#include <vector>

#include "ookb/triplet.hpp"

namespace ookb {

// Immutable triplet set with per-entity neighborhoods.
//
// head_neighbors(e) holds every (h, r, e): triplets where e is the tail.
// tail_neighbors(e) holds every (e, r, t): triplets where e is the head.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Duplicates collapse; triplet order is first occurrence. `num_entities`
  // sizes the index so ids outside the graph still get empty neighborhoods.
  static KnowledgeGraph build(std::span<const Triplet> triplets, EntityId num_entities = 0);

  std::span<const Triplet> triplets() const { return triplets_; }
  std::size_t size() const { return triplets_.size(); }
  bool empty() const { return triplets_.empty(); }
  std::size_t duplicates_collapsed() const { return duplicates_; }

  std::span<const Triplet> head_neighbors(EntityId e) const;
  std::span<const Triplet> tail_neighbors(EntityId e) const;
  std::size_t degree(EntityId e) const { return head_neighbors(e).size() + tail_neighbors(e).size(); }

  // Number of entity slots in the index (max id + 1, at least num_entities).
  EntityId index_size() const { return static_cast<EntityId>(head_offsets_.empty() ? 0 : head_offsets_.size() - 1); }

  bool contains(const Triplet& t) const;

 private:
  std::vector<Triplet> triplets_;
  std::vector<Triplet> by_tail_;  // grouped by tail: head neighborhoods
  std::vector<Triplet> by_head_;  // grouped by head: tail neighborhoods
  std::vector<std::size_t> head_offsets_;
  std::vector<std::size_t> tail_offsets_;
  std::vector<Triplet> sorted_;
  std::size_t duplicates_ = 0;
};

std::set<EntityId> entities_of(std::span<const Triplet> triplets);
std::set<EntityId> entities_of(const KnowledgeGraph& g);
std::set<RelationId> relations_of(std::span<const Triplet> triplets);
std::set<RelationId> relations_of(const KnowledgeGraph& g);

}  // namespace ookb

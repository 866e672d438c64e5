#include "ookb/knowledge_graph.hpp"

#include <algorithm>
#include <unordered_set>

namespace ookb {

namespace {

// Counting sort of `items` into buckets keyed by `key`, stable in input order.
template <typename Key>
void bucket(const std::vector<Triplet>& items, std::size_t buckets, Key key, std::vector<Triplet>& out,
            std::vector<std::size_t>& offsets) {
  offsets.assign(buckets + 1, 0);
  for (const auto& t : items) ++offsets[static_cast<std::size_t>(key(t)) + 1];
  for (std::size_t i = 0; i < buckets; ++i) offsets[i + 1] += offsets[i];
  out.resize(items.size());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& t : items) out[cursor[static_cast<std::size_t>(key(t))]++] = t;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::build(std::span<const Triplet> triplets, EntityId num_entities) {
  KnowledgeGraph g;
  std::unordered_set<Triplet, TripletHash> seen;
  seen.reserve(triplets.size());
  EntityId max_id = num_entities - 1;
  for (const auto& t : triplets) {
    if (!seen.insert(t).second) {
      ++g.duplicates_;
      continue;
    }
    g.triplets_.push_back(t);
    max_id = std::max({max_id, t.head, t.tail});
  }
  const auto slots = static_cast<std::size_t>(max_id + 1);
  bucket(g.triplets_, slots, [](const Triplet& t) { return t.tail; }, g.by_tail_, g.head_offsets_);
  bucket(g.triplets_, slots, [](const Triplet& t) { return t.head; }, g.by_head_, g.tail_offsets_);
  g.sorted_ = g.triplets_;
  std::sort(g.sorted_.begin(), g.sorted_.end());
  return g;
}

std::span<const Triplet> KnowledgeGraph::head_neighbors(EntityId e) const {
  if (e < 0 || static_cast<std::size_t>(e) + 1 >= head_offsets_.size()) return {};
  const auto i = static_cast<std::size_t>(e);
  return std::span<const Triplet>(by_tail_).subspan(head_offsets_[i], head_offsets_[i + 1] - head_offsets_[i]);
}

std::span<const Triplet> KnowledgeGraph::tail_neighbors(EntityId e) const {
  if (e < 0 || static_cast<std::size_t>(e) + 1 >= tail_offsets_.size()) return {};
  const auto i = static_cast<std::size_t>(e);
  return std::span<const Triplet>(by_head_).subspan(tail_offsets_[i], tail_offsets_[i + 1] - tail_offsets_[i]);
}

bool KnowledgeGraph::contains(const Triplet& t) const {
  return std::binary_search(sorted_.begin(), sorted_.end(), t);
}

std::set<EntityId> entities_of(std::span<const Triplet> triplets) {
  std::set<EntityId> out;
  for (const auto& t : triplets) {
    out.insert(t.head);
    out.insert(t.tail);
  }
  return out;
}

std::set<EntityId> entities_of(const KnowledgeGraph& g) { return entities_of(g.triplets()); }

std::set<RelationId> relations_of(std::span<const Triplet> triplets) {
  std::set<RelationId> out;
  for (const auto& t : triplets) out.insert(t.relation);
  return out;
}

std::set<RelationId> relations_of(const KnowledgeGraph& g) { return relations_of(g.triplets()); }

}  // namespace ookb

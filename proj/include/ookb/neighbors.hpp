#pragma once

#include <cstdint>
#include <vector>

#include "ookb/knowledge_graph.hpp"

namespace ookb {

// Which side of the target entity the neighbor sits on.
//   Head: (neighbor, r, e) in N_head(e), transformed by T_head.
//   Tail: (e, r, neighbor) in N_tail(e), transformed by T_tail.
enum class Direction : std::uint8_t { Head = 0, Tail = 1 };

struct Edge {
  EntityId neighbor = 0;
  RelationId relation = 0;
  Direction direction = Direction::Head;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// splitmix64 finalizer; used to derive independent deterministic seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

// Capped neighborhood view of a graph. When an entity has more than `cap`
// neighbor triplets, `cap` of them are drawn uniformly without replacement.
// The draw is a pure function of (seed, epoch, entity), so any caller, in any
// order or thread, sees the same subset within an epoch.
class NeighborSampler {
 public:
  NeighborSampler(const KnowledgeGraph& graph, int cap, std::uint64_t seed);

  void set_epoch(std::int64_t epoch) { epoch_ = epoch; }
  std::int64_t epoch() const { return epoch_; }
  int cap() const { return cap_; }
  const KnowledgeGraph& graph() const { return *graph_; }

  // Head-neighborhood edges first, then tail-neighborhood edges, in index
  // order (a sampled subset keeps that relative order).
  std::vector<Edge> edges(EntityId e) const;

 private:
  const KnowledgeGraph* graph_;
  int cap_;
  std::uint64_t seed_;
  std::int64_t epoch_ = 0;
};

}  // namespace ookb

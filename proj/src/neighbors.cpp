#include "ookb/neighbors.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ookb/errors.hpp"

namespace ookb {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return mix_seed(mix_seed(a, b), c); }

NeighborSampler::NeighborSampler(const KnowledgeGraph& graph, int cap, std::uint64_t seed)
    : graph_(&graph), cap_(cap), seed_(seed) {
  if (cap < 1) throw ConfigError("neighbor cap must be at least 1");
}

std::vector<Edge> NeighborSampler::edges(EntityId e) const {
  const auto heads = graph_->head_neighbors(e);
  const auto tails = graph_->tail_neighbors(e);
  const std::size_t total = heads.size() + tails.size();
  auto edge_at = [&](std::size_t i) {
    if (i < heads.size()) return Edge{heads[i].head, heads[i].relation, Direction::Head};
    const auto& t = tails[i - heads.size()];
    return Edge{t.tail, t.relation, Direction::Tail};
  };

  std::vector<Edge> out;
  if (total <= static_cast<std::size_t>(cap_)) {
    out.reserve(total);
    for (std::size_t i = 0; i < total; ++i) out.push_back(edge_at(i));
    return out;
  }
  std::mt19937_64 rng(mix_seed(seed_, static_cast<std::uint64_t>(epoch_), static_cast<std::uint64_t>(e)));
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  const auto k = static_cast<std::size_t>(cap_);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  out.reserve(k);
  for (auto i : idx) out.push_back(edge_at(i));
  return out;
}

}  // namespace ookb

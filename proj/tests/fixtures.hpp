#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ookb/graph_model.hpp"
#include "ookb/knowledge_graph.hpp"
#include "ookb/trainer.hpp"
#include "ookb/triplet_io.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ookb-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Triplets over string names; ids come from interning in order.
inline std::vector<ookb::Triplet> named(ookb::Vocabularies& v,
                                        const std::vector<std::array<std::string, 3>>& rows) {
  std::vector<ookb::Triplet> out;
  for (const auto& [h, r, t] : rows) out.push_back({v.entities.intern(h), v.relations.intern(r), v.entities.intern(t)});
  return out;
}

// Random graph over n entities and k relations with m distinct triplets, no self loops.
inline std::vector<ookb::Triplet> random_graph(std::mt19937_64& rng, int n, int k, int m) {
  std::uniform_int_distribution<int> ent(0, n - 1), rel(0, k - 1);
  std::vector<ookb::Triplet> out;
  for (int tries = 0; static_cast<int>(out.size()) < m && tries < 100 * m; ++tries) {
    ookb::Triplet t{ent(rng), rel(rng), ent(rng)};
    if (t.head == t.tail) continue;
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

// A training graph with an uncapped sampler and a propagation context over it.
struct Neighborhood {
  ookb::KnowledgeGraph graph;
  ookb::NeighborSampler sampler;
  ookb::PropagationContext ctx;

  explicit Neighborhood(const std::vector<ookb::Triplet>& triplets, ookb::EntityId num_entities = 0, int cap = 1 << 20)
      : graph(ookb::KnowledgeGraph::build(triplets, num_entities)), sampler(graph, cap, 7) {
    ctx.train = &sampler;
  }
  Neighborhood(const Neighborhood&) = delete;
  Neighborhood& operator=(const Neighborhood&) = delete;
};

inline ookb::PropagationConfig propagation(int dim, int depth, ookb::PropagationMode mode, ookb::Pooling pooling,
                                           ookb::TransitionKind transition) {
  ookb::PropagationConfig c;
  c.dim = dim;
  c.depth = depth;
  c.mode = mode;
  c.pooling = pooling;
  c.transition = transition;
  return c;
}

// Copies every parameter of `from` into the same-named parameter of `to`.
template <typename Scalar>
void copy_params(const ookb::GraphModel<Scalar>& from, ookb::GraphModel<Scalar>& to) {
  for (const auto& p : from.params())
    if (to.params().contains(p.name)) to.params().get(p.name).value = p.value;
}

// a -> b -> c -> d under one relation: TransE fits it exactly with
// v_k = v_a + k r, and every corruption then scores at least |r|.
struct ChainToy {
  std::vector<ookb::Triplet> triplets = {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}};
  ookb::PropagationConfig model;
  ookb::TrainConfig train;

  ChainToy() {
    model.dim = 4;
    model.mode = ookb::PropagationMode::None;
    model.norm_p = 2;
    train.epochs = 500;
    train.tau = 1;
    train.adam.alpha1 = 0.1;
    train.adam.alpha2 = 0.1;
    train.checkpoint_every = 0;
  }
};

}  // namespace fixtures

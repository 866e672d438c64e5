#pragma once

#include <cmath>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ookb/errors.hpp"
#include "ookb/model_config.hpp"
#include "ookb/neighbors.hpp"
#include "ookb/numerics/batchnorm.hpp"
#include "ookb/numerics/tape.hpp"
#include "ookb/triplet.hpp"

namespace ookb {

using numerics::BatchNormMode;

// Where neighborhoods come from during one propagation.
//
// Known entities propagate over `train` at every level. An entity listed in
// `ookb` has no usable base embedding: at the top level its neighborhood is
// taken from `aux`, and it never appears as anyone's neighbor below the top.
struct PropagationContext {
  const NeighborSampler* train = nullptr;
  const NeighborSampler* aux = nullptr;
  const std::unordered_set<EntityId>* ookb = nullptr;
  // Optional, for error messages.
  const Vocabulary* entity_names = nullptr;

  bool is_ookb(EntityId e) const { return ookb != nullptr && ookb->count(e) != 0; }
  std::string describe(EntityId e) const {
    if (entity_names != nullptr && entity_names->contains(e)) return "'" + entity_names->name(e) + "'";
    return "#" + std::to_string(e);
  }
};

// The Graph-NN: base entity/relation embeddings, the propagation network
// (transition + pooling, stacked or unrolled), and the TransE output model
//   f(h, r, t) = || v_h + v_r - v_t ||_p
// on propagated entity vectors and raw relation vectors.
//
// Embeddings are stored one column per entity / relation (d x N).
template <typename Scalar>
class GraphModel {
 public:
  using Mat = numerics::Matrix<Scalar>;
  using Vec = numerics::Vector<Scalar>;
  using Var = numerics::Var<Scalar>;
  using Tape = numerics::Tape<Scalar>;
  using Store = numerics::ParamStore<Scalar>;
  using Index = numerics::Index;

  GraphModel(const PropagationConfig& config, EntityId num_entities, RelationId num_relations, std::uint64_t seed)
      : config_(config), num_entities_(num_entities), num_relations_(num_relations) {
    config_.validate();
    if (num_entities < 1 || num_relations < 1) throw ConfigError("model needs at least one entity and relation");
    const Index d = config_.dim;
    std::mt19937_64 rng(seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    auto uniform_init = [&](Index rows, Index cols) {
      Mat m(rows, cols);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(uniform(rng));
      return m;
    };
    std::normal_distribution<double> noise(0.0, 0.01);
    auto near_identity = [&] {
      Mat m = Mat::Identity(d, d);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] += static_cast<Scalar>(noise(rng));
      return m;
    };

    entity_ = store_.add("entity", uniform_init(d, num_entities));
    relation_ = store_.add("relation", uniform_init(d, num_relations));

    const numerics::BatchNormOptions bn{config_.bn_momentum, config_.bn_epsilon};
    for (int layer = 0; layer < config_.parameter_sets(); ++layer) {
      const std::string prefix = "layer" + std::to_string(layer);
      switch (config_.transition) {
        case TransitionKind::Identity:
          break;
        case TransitionKind::TanhLayer:
        case TransitionKind::ReluLayer:
          for (int dir = 0; dir < 2; ++dir)
            shared_matrix_.push_back(store_.add(prefix + "/" + direction_name(dir) + "/A", near_identity()));
          break;
        case TransitionKind::RelationReluBn:
          for (RelationId r = 0; r < num_relations; ++r)
            for (int dir = 0; dir < 2; ++dir) {
              const auto name = prefix + "/" + direction_name(dir) + "/rel" + std::to_string(r);
              relation_matrix_.push_back(store_.add(name + "/A", near_identity()));
              batchnorm_.push_back(numerics::add_batchnorm(store_, name + "/bn", d, bn));
            }
          break;
      }
    }
  }

  const PropagationConfig& config() const { return config_; }
  EntityId num_entities() const { return num_entities_; }
  RelationId num_relations() const { return num_relations_; }
  Store& params() { return store_; }
  const Store& params() const { return store_; }
  numerics::Parameter<Scalar>& entity_embeddings() { return store_[entity_]; }
  const numerics::Parameter<Scalar>& entity_embeddings() const { return store_[entity_]; }
  numerics::Parameter<Scalar>& relation_embeddings() { return store_[relation_]; }
  const numerics::Parameter<Scalar>& relation_embeddings() const { return store_[relation_]; }

  // Parameter handles, for tests that need to set specific matrices.
  std::size_t matrix_handle(RelationId r, Direction dir, int layer) const {
    switch (config_.transition) {
      case TransitionKind::TanhLayer:
      case TransitionKind::ReluLayer:
        return shared_matrix_.at(static_cast<std::size_t>(layer * 2 + static_cast<int>(dir)));
      case TransitionKind::RelationReluBn:
        return relation_matrix_.at(group_slot(r, dir, layer));
      case TransitionKind::Identity:
        break;
    }
    throw ConfigError("identity transition has no matrices");
  }
  const numerics::BatchNormState& batchnorm_state(RelationId r, Direction dir, int layer) const {
    return batchnorm_.at(group_slot(r, dir, layer));
  }

  // Applies the configured transition T^(layer)_dir for relation r to every
  // column of x.
  Var transition(Tape& tape, Var x, RelationId r, Direction dir, int layer, BatchNormMode mode) {
    if (r < 0 || r >= num_relations_) throw InferenceError("unknown relation id " + std::to_string(r));
    if (config_.transition != TransitionKind::Identity && (layer < 0 || layer >= config_.parameter_sets()))
      throw ConfigError("transition layer " + std::to_string(layer) + " out of range");
    switch (config_.transition) {
      case TransitionKind::Identity:
        return x;
      case TransitionKind::TanhLayer:
        return numerics::tanh_act(numerics::affine(tape.param(store_[matrix_handle(r, dir, layer)]), x));
      case TransitionKind::ReluLayer:
        return numerics::relu(numerics::affine(tape.param(store_[matrix_handle(r, dir, layer)]), x));
      case TransitionKind::RelationReluBn: {
        const auto& bn = batchnorm_state(r, dir, layer);
        Var ax = numerics::affine(tape.param(store_[matrix_handle(r, dir, layer)]), x);
        return numerics::relu(numerics::batchnorm(ax, tape.param(store_[bn.gamma]), tape.param(store_[bn.beta]),
                                                  store_, bn, mode));
      }
    }
    return x;
  }

  // v^(depth) for each entity (d x n, column j for entities[j]).
  //
  // Each step groups all neighbor columns sharing a transition (relation and
  // direction) into one batch, so batch norm sees per-group statistics. An
  // entity with no usable neighbor keeps its base embedding at every depth;
  // an OOKB entity without auxiliary neighbors is an InferenceError.
  Var propagate(Tape& tape, std::span<const EntityId> entities, const PropagationContext& ctx, BatchNormMode mode) {
    for (auto e : entities) check_entity(e, ctx);
    const int steps = config_.steps();
    if (steps == 0) {
      for (auto e : entities)
        if (ctx.is_ookb(e))
          throw InferenceError("entity " + ctx.describe(e) + " is OOKB and plain TransE cannot embed it");
      return tape.gather(store_[entity_], to_index(entities));
    }

    // Expand the frontier downwards: level[n] are the entities whose v^(n) is needed.
    std::vector<std::vector<EntityId>> level(static_cast<std::size_t>(steps) + 1);
    std::vector<std::vector<std::vector<Edge>>> edges(static_cast<std::size_t>(steps) + 1);
    level[static_cast<std::size_t>(steps)].assign(entities.begin(), entities.end());
    for (int n = steps; n >= 1; --n) {
      const auto un = static_cast<std::size_t>(n);
      std::unordered_map<EntityId, Index> below_pos;
      auto& below = level[un - 1];
      edges[un].resize(level[un].size());
      for (std::size_t j = 0; j < level[un].size(); ++j) {
        const EntityId e = level[un][j];
        std::vector<Edge> es;
        if (ctx.is_ookb(e)) {
          if (n != steps) throw InferenceError("OOKB entity " + ctx.describe(e) + " reached a lower level");
          if (ctx.aux != nullptr) es = ctx.aux->edges(e);
        } else if (ctx.train != nullptr) {
          es = ctx.train->edges(e);
        }
        std::erase_if(es, [&](const Edge& edge) { return ctx.is_ookb(edge.neighbor); });
        if (es.empty() && ctx.is_ookb(e))
          throw InferenceError("OOKB entity " + ctx.describe(e) + " has no auxiliary triplet");
        for (const auto& edge : es) {
          if (edge.neighbor < 0 || edge.neighbor >= num_entities_)
            throw InferenceError("neighbor " + ctx.describe(edge.neighbor) + " has no embedding");
          if (below_pos.emplace(edge.neighbor, static_cast<Index>(below.size())).second)
            below.push_back(edge.neighbor);
        }
        edges[un][j] = std::move(es);
      }
      for (auto& es : edges[un])
        for (auto& edge : es) edge.neighbor = static_cast<EntityId>(below_pos.at(edge.neighbor));
    }

    Var current = tape.gather(store_[entity_], to_index(level[0]));
    for (int n = 1; n <= steps; ++n) {
      const int layer = config_.mode == PropagationMode::Stacked ? n - 1 : 0;
      current = propagation_step(tape, current, level[static_cast<std::size_t>(n)],
                                 edges[static_cast<std::size_t>(n)], layer, mode);
    }
    return current;
  }

  // Scores (1 x n) of triplets on propagated vectors.
  Var score(Tape& tape, std::span<const Triplet> triplets, const PropagationContext& ctx, BatchNormMode mode) {
    std::vector<EntityId> unique;
    std::unordered_map<EntityId, Index> pos;
    auto slot = [&](EntityId e) {
      auto [it, fresh] = pos.emplace(e, static_cast<Index>(unique.size()));
      if (fresh) unique.push_back(e);
      return it->second;
    };
    std::vector<Index> heads, tails, rels;
    for (const auto& t : triplets) {
      if (t.relation < 0 || t.relation >= num_relations_)
        throw InferenceError("unknown relation id " + std::to_string(t.relation));
      heads.push_back(slot(t.head));
      tails.push_back(slot(t.tail));
      rels.push_back(t.relation);
    }
    Var v = propagate(tape, unique, ctx, mode);
    Var h = numerics::select_columns(v, std::span<const Index>(heads));
    Var t = numerics::select_columns(v, std::span<const Index>(tails));
    Var r = tape.gather(store_[relation_], rels);
    return numerics::column_norm(h + r - t, config_.norm_p);
  }

  // Inference helpers: BN in inference mode, nothing recorded or mutated,
  // safe to call concurrently on a shared model.
  Vec propagate_one(EntityId e, const PropagationContext& ctx) const {
    Tape tape(false);
    const EntityId ids[] = {e};
    return mutable_self().propagate(tape, ids, ctx, BatchNormMode::Inference).value().col(0);
  }

  Mat propagate_many(std::span<const EntityId> entities, const PropagationContext& ctx) const {
    Tape tape(false);
    return mutable_self().propagate(tape, entities, ctx, BatchNormMode::Inference).value();
  }

  std::vector<double> score_triplets(std::span<const Triplet> triplets, const PropagationContext& ctx,
                                     std::size_t chunk = 4096) const {
    std::vector<double> out;
    out.reserve(triplets.size());
    for (std::size_t begin = 0; begin < triplets.size(); begin += chunk) {
      const auto n = std::min(chunk, triplets.size() - begin);
      Tape tape(false);
      const auto& s = mutable_self().score(tape, triplets.subspan(begin, n), ctx, BatchNormMode::Inference).value();
      for (Index j = 0; j < s.cols(); ++j) out.push_back(static_cast<double>(s(0, j)));
    }
    return out;
  }

  Vec transition_one(const Vec& v, RelationId r, Direction dir, int layer) const {
    Tape tape(false);
    Var x = tape.constant(v);
    return mutable_self().transition(tape, x, r, dir, layer, BatchNormMode::Inference).value().col(0);
  }

  // Rescales entity columns whose L2 norm exceeds 1.
  void project_entities_to_unit_ball() {
    auto& m = store_[entity_].value;
    for (Index j = 0; j < m.cols(); ++j) {
      const Scalar n = m.col(j).norm();
      if (n > Scalar(1)) m.col(j) /= n;
    }
  }

 private:
  static const char* direction_name(int dir) { return dir == 0 ? "head" : "tail"; }

  std::size_t group_slot(RelationId r, Direction dir, int layer) const {
    return static_cast<std::size_t>((layer * num_relations_ + r) * 2 + static_cast<int>(dir));
  }

  GraphModel& mutable_self() const { return const_cast<GraphModel&>(*this); }

  static std::vector<Index> to_index(std::span<const EntityId> ids) { return {ids.begin(), ids.end()}; }

  void check_entity(EntityId e, const PropagationContext& ctx) const {
    if (ctx.is_ookb(e)) return;
    if (e < 0 || e >= num_entities_) throw InferenceError("unknown entity " + ctx.describe(e));
  }

  // One application of the propagation model: v^(n) of `targets` from the
  // columns of `below` (v^(n-1) of the previous level). edges[j] refers to
  // columns of `below`.
  Var propagation_step(Tape& tape, Var below, const std::vector<EntityId>& targets,
                       const std::vector<std::vector<Edge>>& edges, int layer, BatchNormMode mode) {
    // Nothing to compute (only fallback entities above); `below` is empty too.
    if (targets.empty()) return below;
    // Group key: (relation, direction) for relation-dependent transitions,
    // direction for the shared ones, a single group for identity.
    auto key_of = [&](const Edge& e) -> std::pair<RelationId, int> {
      switch (config_.transition) {
        case TransitionKind::Identity:
          return {0, 0};
        case TransitionKind::TanhLayer:
        case TransitionKind::ReluLayer:
          return {0, static_cast<int>(e.direction)};
        case TransitionKind::RelationReluBn:
          return {e.relation, static_cast<int>(e.direction)};
      }
      return {0, 0};
    };
    std::map<std::pair<RelationId, int>, std::vector<std::pair<std::size_t, std::size_t>>> groups;
    for (std::size_t j = 0; j < edges.size(); ++j)
      for (std::size_t k = 0; k < edges[j].size(); ++k) groups[key_of(edges[j][k])].emplace_back(j, k);

    // Column of each (target, edge) inside the concatenated transition output.
    std::vector<std::vector<Index>> column(edges.size());
    for (std::size_t j = 0; j < edges.size(); ++j) column[j].resize(edges[j].size());
    std::vector<Var> parts;
    Index at = 0;
    for (const auto& [key, members] : groups) {
      std::vector<Index> src;
      src.reserve(members.size());
      for (const auto& [j, k] : members) {
        src.push_back(edges[j][k].neighbor);
        column[j][k] = at++;
      }
      Var x = numerics::select_columns(below, std::span<const Index>(src));
      parts.push_back(transition(tape, x, key.first, static_cast<Direction>(key.second), layer, mode));
    }

    std::vector<Index> order;
    std::vector<Index> offsets{0};
    std::vector<Index> fallback;
    // Final column for target j: pooled segment index, or (segments + k) for the k-th fallback.
    std::vector<std::pair<bool, Index>> placement(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (edges[j].empty()) {
        placement[j] = {false, static_cast<Index>(fallback.size())};
        fallback.push_back(targets[j]);
        continue;
      }
      placement[j] = {true, static_cast<Index>(offsets.size() - 1)};
      for (auto c : column[j]) order.push_back(c);
      offsets.push_back(static_cast<Index>(order.size()));
    }

    std::vector<Var> pieces;
    const auto segments = static_cast<Index>(offsets.size() - 1);
    if (segments > 0) {
      Var all = parts.size() == 1 ? parts.front() : numerics::concat_columns(std::span<const Var>(parts));
      Var gathered = numerics::select_columns(all, std::span<const Index>(order));
      pieces.push_back(numerics::segment_pool(gathered, std::span<const Index>(offsets), config_.pooling));
    }
    if (fallback.empty()) return pieces.front();
    pieces.push_back(tape.gather(store_[entity_], std::span<const Index>(fallback)));
    Var joined = pieces.size() == 1 ? pieces.front() : numerics::concat_columns(std::span<const Var>(pieces));
    std::vector<Index> final_order;
    final_order.reserve(targets.size());
    for (const auto& [pooled, k] : placement) final_order.push_back(pooled ? k : segments + k);
    return numerics::select_columns(joined, std::span<const Index>(final_order));
  }

  PropagationConfig config_;
  EntityId num_entities_;
  RelationId num_relations_;
  Store store_;
  std::size_t entity_ = 0;
  std::size_t relation_ = 0;
  std::vector<std::size_t> shared_matrix_;
  std::vector<std::size_t> relation_matrix_;
  std::vector<numerics::BatchNormState> batchnorm_;
};

// sum_i f(pos_i) + [tau - f(neg_i)]_+
template <typename Scalar>
numerics::Var<Scalar> loss_absolute(numerics::Var<Scalar> pos, numerics::Var<Scalar> neg, Scalar tau) {
  if (pos.cols() != neg.cols()) throw NumericalFault("loss_absolute: positives and negatives must pair up");
  return numerics::sum(pos) + numerics::sum(numerics::hinge(numerics::scale_shift(neg, Scalar(-1), tau)));
}

// sum_i [tau + f(pos_i) - f(neg_i)]_+
template <typename Scalar>
numerics::Var<Scalar> loss_pairwise(numerics::Var<Scalar> pos, numerics::Var<Scalar> neg, Scalar tau) {
  if (pos.cols() != neg.cols()) throw NumericalFault("loss_pairwise: positives and negatives must pair up");
  return numerics::sum(numerics::hinge(numerics::scale_shift(pos - neg, Scalar(1), tau)));
}

template <typename Scalar>
numerics::Var<Scalar> objective_loss(Objective objective, numerics::Var<Scalar> pos, numerics::Var<Scalar> neg,
                                     Scalar tau) {
  return objective == Objective::Absolute ? loss_absolute(pos, neg, tau) : loss_pairwise(pos, neg, tau);
}

}  // namespace ookb

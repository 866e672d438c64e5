#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ookb/graph_model.hpp"
#include "ookb/knowledge_graph.hpp"
#include "ookb/numerics/adam.hpp"

namespace ookb {

struct TrainConfig {
  int epochs = 300;
  std::size_t minibatch = 5000;
  double tau = 300;
  numerics::AdamConfig adam;
  Objective objective = Objective::Absolute;
  std::uint64_t seed = 1;
  // Checkpoint every N epochs (0 = final only).
  int checkpoint_every = 10;
  // Resample corrupted triplets that happen to be in the training graph.
  bool filter_false_negatives = false;
  bool project_unit_ball = false;
  // Stop after this many checkpoints without validation improvement (0 = off).
  int early_stop_patience = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Per relation: tph = #triplets / #distinct heads, hpt = #triplets / #distinct tails.
struct BernoulliStats {
  std::vector<double> tails_per_head;
  std::vector<double> heads_per_tail;

  // tph / (tph + hpt); 0.5 for relations without triplets.
  double head_probability(RelationId r) const;
};

BernoulliStats compute_bernoulli_stats(const KnowledgeGraph& g, RelationId num_relations = 0);

// Replaces the head (probability tph / (tph + hpt)) or the tail by an entity
// drawn uniformly from `pool`, redrawing until the result differs from `t`
// (and, with `known` set, is not a known triplet).
Triplet corrupt(const Triplet& t, const BernoulliStats& stats, std::span<const EntityId> pool, std::mt19937_64& rng,
                const KnowledgeGraph* known = nullptr);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0;
  double mean_pos_score = 0;
  double mean_neg_score = 0;
  double step_size = 0;
  double wall_time = 0;
  std::size_t minibatches = 0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},       {"loss", loss},           {"meanPosScore", mean_pos_score},
            {"meanNegScore", mean_neg_score}, {"stepSize", step_size}, {"wallTime", wall_time}};
  }
};

// Minibatch Adam training of a GraphModel over one knowledge graph.
//
// Epoch k: shuffle the positives, cut minibatches, pair each positive with
// one Bernoulli-corrupted negative, score both on propagated vectors (BN in
// training mode), apply the objective, backprop, and take an Adam step of
// size alpha1 / (alpha2 k + 1). Every random draw derives from
// (seed, purpose, epoch), so a run resumed at epoch k matches an
// uninterrupted one.
template <typename Scalar>
class Trainer {
 public:
  Trainer(GraphModel<Scalar>& model, const KnowledgeGraph& graph, TrainConfig config)
      : model_(model),
        graph_(graph),
        config_(config),
        sampler_(graph, model.config().neighbor_cap, mix_seed(config.seed, 0x6e65696768ULL)),
        stats_(compute_bernoulli_stats(graph, model.num_relations())) {
    config_.validate();
    if (graph.empty()) throw DataError("training graph is empty");
    const auto ents = entities_of(graph);
    pool_.assign(ents.begin(), ents.end());
    if (pool_.size() < 2) throw DataError("training graph needs at least two entities");
    if (pool_.back() >= model.num_entities()) throw DataError("training graph has entities beyond the model");
  }

  const TrainConfig& config() const { return config_; }
  int next_epoch() const { return next_epoch_; }
  void set_next_epoch(int epoch) { next_epoch_ = epoch; }
  const NeighborSampler& sampler() const { return sampler_; }
  const BernoulliStats& bernoulli() const { return stats_; }

  // Trains epoch next_epoch() and advances it.
  EpochMetrics run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const int epoch = next_epoch_;
    const auto ep = static_cast<std::uint64_t>(epoch);
    sampler_.set_epoch(epoch);
    PropagationContext ctx;
    ctx.train = &sampler_;

    const auto positives = graph_.triplets();
    std::vector<std::size_t> order(positives.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(config_.seed, 1, ep));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::mt19937_64 corrupt_rng(mix_seed(config_.seed, 2, ep));

    EpochMetrics m;
    m.epoch = epoch;
    m.step_size = numerics::adam_step_size(config_.adam, epoch);
    double loss_sum = 0, pos_sum = 0, neg_sum = 0;
    const auto tau = static_cast<Scalar>(config_.tau);
    for (std::size_t begin = 0; begin < order.size(); begin += config_.minibatch) {
      const auto n = std::min(config_.minibatch, order.size() - begin);
      std::vector<Triplet> batch;
      batch.reserve(2 * n);
      for (std::size_t i = 0; i < n; ++i) batch.push_back(positives[order[begin + i]]);
      for (std::size_t i = 0; i < n; ++i)
        batch.push_back(corrupt(batch[i], stats_, pool_, corrupt_rng,
                                config_.filter_false_negatives ? &graph_ : nullptr));

      model_.params().zero_grad();
      numerics::Tape<Scalar> tape(true);
      auto scores = model_.score(tape, batch, ctx, BatchNormMode::Training);
      std::vector<numerics::Index> pos_idx(n), neg_idx(n);
      std::iota(pos_idx.begin(), pos_idx.end(), 0);
      std::iota(neg_idx.begin(), neg_idx.end(), static_cast<numerics::Index>(n));
      auto pos = numerics::select_columns(scores, std::span<const numerics::Index>(pos_idx));
      auto neg = numerics::select_columns(scores, std::span<const numerics::Index>(neg_idx));
      auto loss = objective_loss(config_.objective, pos, neg, tau);
      const double lv = static_cast<double>(loss.value()(0, 0));
      if (!std::isfinite(lv))
        throw NumericalFault("non-finite loss in epoch " + std::to_string(epoch) + ", minibatch " +
                             std::to_string(m.minibatches));
      tape.backward(loss);
      numerics::adam_step(model_.params(), config_.adam, epoch);
      if (config_.project_unit_ball) model_.project_entities_to_unit_ball();

      loss_sum += lv;
      pos_sum += static_cast<double>(pos.value().sum());
      neg_sum += static_cast<double>(neg.value().sum());
      ++m.minibatches;
    }
    const auto total = static_cast<double>(order.size());
    m.loss = loss_sum / total;
    m.mean_pos_score = pos_sum / total;
    m.mean_neg_score = neg_sum / total;
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++next_epoch_;
    return m;
  }

  struct Hooks {
    std::function<void(const EpochMetrics&)> on_epoch;
    // Called after epochs at the checkpoint cadence and after the last one.
    std::function<void(int completed_epochs)> on_checkpoint;
    // Higher is better; used for early stopping when patience > 0.
    std::function<double()> validation_metric;
  };

  // Runs epochs next_epoch() .. epochs-1. Returns the number of epochs run.
  int train(const Hooks& hooks = {}) {
    int ran = 0;
    double best = -std::numeric_limits<double>::infinity();
    int stale = 0;
    while (next_epoch_ < config_.epochs) {
      const auto m = run_epoch();
      ++ran;
      if (hooks.on_epoch) hooks.on_epoch(m);
      const bool last = next_epoch_ == config_.epochs;
      const bool cadence = config_.checkpoint_every > 0 && next_epoch_ % config_.checkpoint_every == 0;
      if (!(last || cadence)) continue;
      if (hooks.on_checkpoint) hooks.on_checkpoint(next_epoch_);
      if (config_.early_stop_patience > 0 && hooks.validation_metric) {
        const double v = hooks.validation_metric();
        if (v > best) {
          best = v;
          stale = 0;
        } else if (++stale >= config_.early_stop_patience) {
          break;
        }
      }
    }
    return ran;
  }

 private:
  GraphModel<Scalar>& model_;
  const KnowledgeGraph& graph_;
  TrainConfig config_;
  NeighborSampler sampler_;
  BernoulliStats stats_;
  std::vector<EntityId> pool_;
  int next_epoch_ = 0;
};

}  // namespace ookb

#include "ookb/trainer.hpp"

#include <set>

namespace ookb {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (minibatch < 1) throw ConfigError("minibatch must be positive");
  if (!(tau >= 0)) throw ConfigError("tau must be nonnegative");
  if (!(adam.alpha1 > 0) || !(adam.alpha2 >= 0)) throw ConfigError("alpha1 must be positive, alpha2 nonnegative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
  if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be nonnegative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"minibatch", minibatch},
          {"tau", tau},
          {"alpha1", adam.alpha1},
          {"alpha2", adam.alpha2},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"adam_epsilon", adam.epsilon},
          {"objective", to_string(objective)},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"filter_false_negatives", filter_false_negatives},
          {"project_unit_ball", project_unit_ball},
          {"early_stop_patience", early_stop_patience}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.minibatch = j.at("minibatch").get<std::size_t>();
  c.tau = j.at("tau").get<double>();
  c.adam.alpha1 = j.at("alpha1").get<double>();
  c.adam.alpha2 = j.at("alpha2").get<double>();
  c.adam.beta1 = j.value("beta1", 0.9);
  c.adam.beta2 = j.value("beta2", 0.999);
  c.adam.epsilon = j.value("adam_epsilon", 1e-8);
  c.objective = parse_objective(j.at("objective").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_every = j.value("checkpoint_every", 10);
  c.filter_false_negatives = j.value("filter_false_negatives", false);
  c.project_unit_ball = j.value("project_unit_ball", false);
  c.early_stop_patience = j.value("early_stop_patience", 0);
  c.validate();
  return c;
}

double BernoulliStats::head_probability(RelationId r) const {
  const auto i = static_cast<std::size_t>(r);
  if (r < 0 || i >= tails_per_head.size() || tails_per_head[i] <= 0) return 0.5;
  return tails_per_head[i] / (tails_per_head[i] + heads_per_tail[i]);
}

BernoulliStats compute_bernoulli_stats(const KnowledgeGraph& g, RelationId num_relations) {
  RelationId n = num_relations;
  for (const auto& t : g.triplets()) n = std::max(n, t.relation + 1);
  const auto size = static_cast<std::size_t>(n);
  std::vector<std::size_t> count(size, 0);
  std::vector<std::set<EntityId>> heads(size), tails(size);
  for (const auto& t : g.triplets()) {
    const auto r = static_cast<std::size_t>(t.relation);
    ++count[r];
    heads[r].insert(t.head);
    tails[r].insert(t.tail);
  }
  BernoulliStats s;
  s.tails_per_head.assign(size, 0);
  s.heads_per_tail.assign(size, 0);
  for (std::size_t r = 0; r < size; ++r) {
    if (count[r] == 0) continue;
    s.tails_per_head[r] = static_cast<double>(count[r]) / static_cast<double>(heads[r].size());
    s.heads_per_tail[r] = static_cast<double>(count[r]) / static_cast<double>(tails[r].size());
  }
  return s;
}

Triplet corrupt(const Triplet& t, const BernoulliStats& stats, std::span<const EntityId> pool, std::mt19937_64& rng,
                const KnowledgeGraph* known) {
  if (pool.size() < 2) throw DataError("corruption needs at least two candidate entities");
  std::bernoulli_distribution replace_head(stats.head_probability(t.relation));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const bool head = replace_head(rng);
  // Filtering can make a draw impossible (every alternative is a known
  // triplet); give up on the filter after enough attempts.
  constexpr int kFilteredAttempts = 1000;
  constexpr int kMaxAttempts = 1000000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Triplet c = t;
    (head ? c.head : c.tail) = pool[pick(rng)];
    if (c == t) continue;
    if (known != nullptr && attempt < kFilteredAttempts && known->contains(c)) continue;
    return c;
  }
  throw DataError("corruption pool has no entity that differs from the replaced one");
}

}  // namespace ookb

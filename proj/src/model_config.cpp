#include "ookb/model_config.hpp"

#include "ookb/errors.hpp"

namespace ookb {

std::string_view to_string(PropagationMode m) {
  switch (m) {
    case PropagationMode::None:
      return "none";
    case PropagationMode::Stacked:
      return "stacked";
    case PropagationMode::Unrolled:
      return "unrolled";
  }
  return "?";
}

std::string_view to_string(TransitionKind t) {
  switch (t) {
    case TransitionKind::Identity:
      return "identity";
    case TransitionKind::TanhLayer:
      return "tanh-layer";
    case TransitionKind::ReluLayer:
      return "relu-layer";
    case TransitionKind::RelationReluBn:
      return "relation-relu-bn";
  }
  return "?";
}

std::string_view to_string(Pooling p) {
  switch (p) {
    case Pooling::Sum:
      return "sum";
    case Pooling::Avg:
      return "avg";
    case Pooling::Max:
      return "max";
  }
  return "?";
}

std::string_view to_string(Objective o) { return o == Objective::Absolute ? "absolute" : "pairwise"; }

PropagationMode parse_mode(std::string_view s) {
  if (s == "none") return PropagationMode::None;
  if (s == "stacked") return PropagationMode::Stacked;
  if (s == "unrolled") return PropagationMode::Unrolled;
  throw ConfigError("unknown propagation mode '" + std::string(s) + "' (none, stacked, unrolled)");
}

TransitionKind parse_transition(std::string_view s) {
  if (s == "identity") return TransitionKind::Identity;
  if (s == "tanh-layer") return TransitionKind::TanhLayer;
  if (s == "relu-layer") return TransitionKind::ReluLayer;
  if (s == "relation-relu-bn") return TransitionKind::RelationReluBn;
  throw ConfigError("unknown transition '" + std::string(s) +
                    "' (identity, tanh-layer, relu-layer, relation-relu-bn)");
}

Pooling parse_pooling(std::string_view s) {
  if (s == "sum") return Pooling::Sum;
  if (s == "avg") return Pooling::Avg;
  if (s == "max") return Pooling::Max;
  throw ConfigError("unknown pooling '" + std::string(s) + "' (sum, avg, max)");
}

Objective parse_objective(std::string_view s) {
  if (s == "absolute") return Objective::Absolute;
  if (s == "pairwise") return Objective::Pairwise;
  throw ConfigError("unknown objective '" + std::string(s) + "' (absolute, pairwise)");
}

void PropagationConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be positive");
  if (mode != PropagationMode::None && depth < 1) throw ConfigError("depth must be at least 1");
  if (neighbor_cap < 1) throw ConfigError("neighbor_cap must be at least 1");
  if (norm_p != 1 && norm_p != 2) throw ConfigError("norm must be 1 or 2");
  if (!(bn_epsilon > 0)) throw ConfigError("bn_epsilon must be positive");
  if (!(bn_momentum >= 0 && bn_momentum < 1)) throw ConfigError("bn_momentum must be in [0, 1)");
}

int PropagationConfig::parameter_sets() const {
  switch (mode) {
    case PropagationMode::None:
      return 0;
    case PropagationMode::Stacked:
      return depth;
    case PropagationMode::Unrolled:
      return 1;
  }
  return 0;
}

nlohmann::json PropagationConfig::to_json() const {
  return {{"dim", dim},
          {"depth", depth},
          {"mode", to_string(mode)},
          {"pooling", to_string(pooling)},
          {"transition", to_string(transition)},
          {"neighbor_cap", neighbor_cap},
          {"norm", norm_p},
          {"bn_momentum", bn_momentum},
          {"bn_epsilon", bn_epsilon}};
}

PropagationConfig PropagationConfig::from_json(const nlohmann::json& j) {
  PropagationConfig c;
  c.dim = j.at("dim").get<int>();
  c.depth = j.at("depth").get<int>();
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  c.transition = parse_transition(j.at("transition").get<std::string>());
  c.neighbor_cap = j.at("neighbor_cap").get<int>();
  c.norm_p = j.at("norm").get<int>();
  c.bn_momentum = j.value("bn_momentum", 0.9);
  c.bn_epsilon = j.value("bn_epsilon", 1e-5);
  c.validate();
  return c;
}

}  // namespace ookb

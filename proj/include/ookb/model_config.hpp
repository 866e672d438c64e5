#pragma once

#include <json.hpp>
#include <string>
#include <string_view>

#include "ookb/numerics/tape.hpp"

namespace ookb {

using numerics::Pooling;

enum class PropagationMode { None, Stacked, Unrolled };
enum class TransitionKind { Identity, TanhLayer, ReluLayer, RelationReluBn };
enum class Objective { Absolute, Pairwise };

std::string_view to_string(PropagationMode m);
std::string_view to_string(TransitionKind t);
std::string_view to_string(Pooling p);
std::string_view to_string(Objective o);
PropagationMode parse_mode(std::string_view s);
TransitionKind parse_transition(std::string_view s);
Pooling parse_pooling(std::string_view s);
Objective parse_objective(std::string_view s);

// Shape of the propagation network. mode == None is plain TransE on the
// base embeddings (depth is ignored).
struct PropagationConfig {
  int dim = 100;
  int depth = 1;
  PropagationMode mode = PropagationMode::Unrolled;
  Pooling pooling = Pooling::Avg;
  TransitionKind transition = TransitionKind::RelationReluBn;
  int neighbor_cap = 64;
  int norm_p = 1;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  // Throws ConfigError.
  void validate() const;
  // Number of independent transition parameter sets.
  int parameter_sets() const;
  // Propagation steps actually applied (0 for mode None).
  int steps() const { return mode == PropagationMode::None ? 0 : depth; }

  nlohmann::json to_json() const;
  static PropagationConfig from_json(const nlohmann::json& j);
};

}  // namespace ookb

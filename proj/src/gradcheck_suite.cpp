#include <random>

#include "ookb/graph_model.hpp"
#include "ookb/pipeline.hpp"

namespace ookb::pipeline {

namespace {

using numerics::GradcheckOptions;
using numerics::Matrix;
using numerics::ParamStore;
using Tape = numerics::Tape<double>;
using Var = numerics::Var<double>;

Matrix<double> random_matrix(std::mt19937_64& rng, numerics::Index rows, numerics::Index cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<double> m(rows, cols);
  for (numerics::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

GradcheckEntry check_ops(const std::string& name, const GradcheckOptions& options,
                         const std::function<void(ParamStore<double>&, std::mt19937_64&)>& setup,
                         const std::function<Var(ParamStore<double>&, Tape&)>& loss) {
  ParamStore<double> store;
  std::mt19937_64 rng(std::hash<std::string>{}(name));
  setup(store, rng);
  auto result = numerics::gradcheck(store, [&](Tape& t) { return loss(store, t); }, options);
  return {name, result};
}

// 5 entities, 2 relations; every (relation, direction) group that occurs
// has at least two edges so batch norm sees real batch statistics.
const std::vector<Triplet>& fixture_triplets() {
  static const std::vector<Triplet> t = {{0, 0, 1}, {1, 0, 2}, {2, 1, 3}, {3, 1, 4},
                                         {4, 0, 0}, {0, 1, 2}, {1, 1, 3}, {2, 0, 4}};
  return t;
}

const std::vector<Triplet>& fixture_negatives() {
  static const std::vector<Triplet> t = {{0, 0, 3}, {4, 0, 2}, {2, 1, 0}, {1, 1, 4},
                                         {4, 0, 3}, {0, 1, 1}, {1, 1, 0}, {3, 0, 4}};
  return t;
}

GradcheckEntry check_model(const std::string& name, PropagationConfig cfg, Objective objective, double tau,
                           const GradcheckOptions& options) {
  cfg.neighbor_cap = 64;
  GraphModel<double> model(cfg, 5, 2, std::hash<std::string>{}(name));
  // Move BN scale/shift and matrices off their initial values so every
  // parameter is exercised away from the identity.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& p : model.params())
    if (p.trainable && p.name != "entity" && p.name != "relation")
      for (numerics::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += u(rng);

  const auto graph = KnowledgeGraph::build(fixture_triplets(), 5);
  NeighborSampler sampler(graph, cfg.neighbor_cap, 1);
  PropagationContext ctx;
  ctx.train = &sampler;
  std::vector<Triplet> batch = fixture_triplets();
  batch.insert(batch.end(), fixture_negatives().begin(), fixture_negatives().end());
  const auto n = static_cast<numerics::Index>(fixture_triplets().size());
  std::vector<numerics::Index> pos(static_cast<std::size_t>(n)), neg(static_cast<std::size_t>(n));
  for (numerics::Index i = 0; i < n; ++i) {
    pos[static_cast<std::size_t>(i)] = i;
    neg[static_cast<std::size_t>(i)] = n + i;
  }
  auto loss = [&](Tape& tape) {
    auto s = model.score(tape, batch, ctx, BatchNormMode::Training);
    auto p = numerics::select_columns(s, std::span<const numerics::Index>(pos));
    auto q = numerics::select_columns(s, std::span<const numerics::Index>(neg));
    return objective_loss(objective, p, q, tau);
  };
  return {name, numerics::gradcheck(model.params(), loss, options)};
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckOptions& options) {
  std::vector<GradcheckEntry> out;
  auto two = [](ParamStore<double>& s, std::mt19937_64& rng) {
    s.add("A", random_matrix(rng, 3, 3));
    s.add("x", random_matrix(rng, 3, 4));
  };
  out.push_back(check_ops("affine+relu", options, two, [](ParamStore<double>& s, Tape& t) {
    auto y = numerics::relu(numerics::affine(t.param(s.get("A")), t.param(s.get("x"))));
    return numerics::sum(numerics::column_norm(y, 2));
  }));
  out.push_back(check_ops("affine+tanh", options, two, [](ParamStore<double>& s, Tape& t) {
    auto y = numerics::tanh_act(numerics::affine(t.param(s.get("A")), t.param(s.get("x"))));
    return numerics::sum(numerics::column_norm(y, 1));
  }));

  out.push_back(check_ops("hadamard", options, two, [](ParamStore<double>& s, Tape& t) {
    auto y = numerics::hadamard(numerics::affine(t.param(s.get("A")), t.param(s.get("x"))), t.param(s.get("x")));
    return numerics::sum(y);
  }));

  auto bn_setup = [](ParamStore<double>& s, std::mt19937_64& rng) {
    s.add("x", random_matrix(rng, 3, 5));
    auto st = numerics::add_batchnorm(s, "bn", 3);
    s[st.gamma].value = random_matrix(rng, 3, 1);
    s[st.beta].value = random_matrix(rng, 3, 1);
    s[st.running_mean].value = random_matrix(rng, 3, 1) * 0.1;
    s[st.running_var].value = Matrix<double>::Constant(3, 1, 0.5);
  };
  for (auto mode : {BatchNormMode::Training, BatchNormMode::Inference}) {
    const std::string name = mode == BatchNormMode::Training ? "batchnorm(training)" : "batchnorm(inference)";
    out.push_back(check_ops(name, options, bn_setup, [mode](ParamStore<double>& s, Tape& t) {
      numerics::BatchNormState st{s.handle("bn/gamma"), s.handle("bn/beta"), s.handle("bn/running_mean"),
                                  s.handle("bn/running_var"), {}};
      auto y = numerics::batchnorm(t.param(s.get("x")), t.param(s[st.gamma]), t.param(s[st.beta]), s, st, mode);
      return numerics::sum(numerics::column_norm(y, 2));
    }));
  }

  for (auto pooling : {Pooling::Sum, Pooling::Avg, Pooling::Max}) {
    out.push_back(check_ops("pool(" + std::string(to_string(pooling)) + ")", options,
                            [](ParamStore<double>& s, std::mt19937_64& rng) { s.add("x", random_matrix(rng, 3, 6)); },
                            [pooling](ParamStore<double>& s, Tape& t) {
                              const numerics::Index offsets[] = {0, 2, 5, 6};
                              auto y = numerics::segment_pool(t.param(s.get("x")), std::span<const numerics::Index>(offsets), pooling);
                              return numerics::sum(numerics::column_norm(y, 2));
                            }));
  }

  auto scores = [](ParamStore<double>& s, std::mt19937_64& rng) {
    s.add("pos", random_matrix(rng, 1, 6).cwiseAbs() * 2);
    s.add("neg", random_matrix(rng, 1, 6).cwiseAbs() * 2);
  };
  out.push_back(check_ops("loss_absolute", options, scores, [](ParamStore<double>& s, Tape& t) {
    return loss_absolute(t.param(s.get("pos")), t.param(s.get("neg")), 1.3);
  }));
  out.push_back(check_ops("loss_pairwise", options, scores, [](ParamStore<double>& s, Tape& t) {
    return loss_pairwise(t.param(s.get("pos")), t.param(s.get("neg")), 1.3);
  }));

  PropagationConfig cfg;
  cfg.dim = 4;
  cfg.transition = TransitionKind::RelationReluBn;
  cfg.mode = PropagationMode::Unrolled;
  cfg.depth = 1;
  cfg.pooling = Pooling::Avg;
  out.push_back(check_model("model(relation-relu-bn, avg, depth 1, absolute)", cfg, Objective::Absolute, 8.0, options));
  cfg.mode = PropagationMode::Stacked;
  cfg.depth = 2;
  cfg.pooling = Pooling::Max;
  out.push_back(check_model("model(relation-relu-bn, max, stacked 2, pairwise)", cfg, Objective::Pairwise, 4.0, options));
  cfg.mode = PropagationMode::Unrolled;
  cfg.pooling = Pooling::Sum;
  cfg.norm_p = 2;
  out.push_back(check_model("model(relation-relu-bn, sum, unrolled 2, L2)", cfg, Objective::Absolute, 8.0, options));
  cfg.transition = TransitionKind::TanhLayer;
  cfg.norm_p = 1;
  cfg.pooling = Pooling::Avg;
  out.push_back(check_model("model(tanh-layer, avg, unrolled 2)", cfg, Objective::Absolute, 8.0, options));
  cfg.mode = PropagationMode::None;
  out.push_back(check_model("model(plain TransE)", cfg, Objective::Pairwise, 2.0, options));
  return out;
}

}  // namespace ookb::pipeline

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ookb/eval.hpp"
#include "ookb/trainer.hpp"

using namespace ookb;
using Model = GraphModel<double>;
using Vec = Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<LabeledTriplet> with_labels(RelationId r, const std::vector<bool>& labels) {
  std::vector<LabeledTriplet> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({{static_cast<EntityId>(i), r, 0}, labels[i]});
  return out;
}

double scan_accuracy(const std::vector<double>& scores, const std::vector<LabeledTriplet>& v, double t) {
  std::size_t right = 0;
  for (std::size_t i = 0; i < v.size(); ++i) right += (scores[i] < t) == v[i].positive ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(v.size());
}

Model transe(int dim, EntityId n, RelationId k) {
  return Model(fixtures::propagation(dim, 1, PropagationMode::None, Pooling::Avg, TransitionKind::Identity), n, k, 1);
}

}  // namespace

TEST_CASE("best_threshold: separable scores") {
  const std::vector<double> s = {1, 2, 5, 6};
  const bool l[] = {true, true, false, false};
  const auto c = best_threshold(s, l);
  CHECK(c.accuracy == 1.0);
  CHECK(c.threshold > 2);
  CHECK(c.threshold <= 5);
}

TEST_CASE("best_threshold: all positive gives +inf") {
  const std::vector<double> s = {3, 1, 2};
  const bool l[] = {true, true, true};
  const auto c = best_threshold(s, l);
  CHECK(c.threshold == kInf);
  CHECK(c.accuracy == 1.0);
  const bool none[] = {false, false, false};
  CHECK(best_threshold(s, none).threshold == -kInf);
}

TEST_CASE("best_threshold: errors") {
  const std::vector<double> s = {1};
  const bool l[] = {true, false};
  CHECK_THROWS_AS(best_threshold(s, std::span<const bool>(l, 2)), DataError);
  CHECK_THROWS_AS(best_threshold({}, {}), DataError);
}

TEST_CASE("property: best_threshold matches the exhaustive midpoint scan") {
  std::mt19937_64 rng(59);
  std::uniform_int_distribution<int> coarse(0, 12);
  std::normal_distribution<double> normal(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 40);
    std::vector<double> scores(n);
    std::vector<bool> labels(n);
    std::unique_ptr<bool[]> flags(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores force ties.
      scores[i] = trial % 2 == 0 ? coarse(rng) / 2.0 : normal(rng);
      labels[i] = normal(rng) + (scores[i] < 2 ? 0.8 : -0.8) > 0;
      flags[i] = labels[i];
    }
    const auto got = best_threshold(scores, std::span<const bool>(flags.get(), n));
    const auto expect = oracles::threshold_scan(scores, labels);
    CHECK(got.accuracy == doctest::Approx(expect.accuracy).epsilon(1e-15));
    // Same cutoff up to midpoint rounding.
    if (std::isinf(expect.threshold)) {
      CHECK(got.threshold == expect.threshold);
    } else {
      CHECK(got.threshold == doctest::Approx(expect.threshold).epsilon(1e-14));
    }
  }
}

TEST_CASE("classify: strict inequality") {
  CHECK(classify(0.0, 1.0));
  CHECK_FALSE(classify(1.0, 1.0));
  CHECK(classify(1e300, kInf));
  CHECK_FALSE(classify(-1e300, -kInf));
}

TEST_CASE("property: classify is monotone in the threshold") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> normal(0, 3);
  for (int i = 0; i < 10000; ++i) {
    const double s = normal(rng), a = normal(rng), b = a + std::abs(normal(rng));
    if (classify(s, a)) CHECK(classify(s, b));
  }
}

TEST_CASE("accuracy: examples") {
  const auto v = with_labels(0, {true, false, true});
  const bool all[] = {true, false, true};
  CHECK(accuracy(v, all) == 1.0);
  const auto one = with_labels(0, {true});
  const bool yes[] = {true}, no[] = {false};
  CHECK(accuracy(one, yes) == 1.0);
  CHECK(accuracy(one, no) == 0.0);
  CHECK_THROWS_AS(accuracy({}, std::span<const bool>{}), DataError);

  std::mt19937_64 rng(67);
  std::bernoulli_distribution coin(0.5);
  std::vector<bool> labels;
  for (int i = 0; i < 10000; ++i) labels.push_back(i % 2 == 0);
  const auto balanced = with_labels(0, labels);
  std::unique_ptr<bool[]> guesses(new bool[10000]);
  for (int i = 0; i < 10000; ++i) guesses[i] = coin(rng);
  CHECK(std::abs(accuracy(balanced, std::span<const bool>(guesses.get(), 10000)) - 0.5) < 0.02);
}

TEST_CASE("tune_thresholds: per relation with a global fallback") {
  std::vector<LabeledTriplet> v = {{{0, 0, 1}, true}, {{1, 0, 2}, false}, {{0, 1, 1}, true}, {{2, 1, 0}, false}};
  const std::vector<double> s = {1, 3, 10, 20};
  const auto table = tune_thresholds(v, s, 3);
  CHECK(table.threshold(0) == 2);
  CHECK(table.threshold(1) == 15);
  CHECK(table.per_relation.at(2) == table.global);
  CHECK(table.threshold(7) == table.global);
  CHECK(accuracy(v, table, s) == 1.0);
  const auto global = tune_thresholds(v, s, 3, false);
  CHECK(global.threshold(0) == global.threshold(1));
  CHECK(accuracy(v, global, s) == 0.75);
  CHECK_THROWS_AS(tune_thresholds({}, std::span<const double>{}, 1), DataError);
}

TEST_CASE("property: per-relation tuning beats every global threshold on validation") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal(0, 1);
  std::uniform_int_distribution<int> rel(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabeledTriplet> v;
    std::vector<double> s;
    for (int i = 0; i < 30; ++i) {
      const RelationId r = rel(rng);
      const bool positive = normal(rng) > 0;
      v.push_back({{i, r, i + 1}, positive});
      s.push_back(normal(rng) + (positive ? 0 : 1.0) + r);
    }
    std::vector<bool> labels;
    for (const auto& x : v) labels.push_back(x.positive);
    const auto table = tune_thresholds(v, s, 4);
    const double tuned = accuracy(v, table, s);
    CHECK(tuned >= oracles::threshold_scan(s, labels).accuracy);
    for (double t : s) CHECK(tuned >= scan_accuracy(s, v, t));
  }
}

TEST_CASE("threshold table: digest and json") {
  ThresholdTable t;
  t.per_relation = {{0, 1.5}, {2, kInf}, {1, -kInf}};
  t.global = 0.25;
  const auto back = ThresholdTable::from_json(t.to_json());
  CHECK(back.digest() == t.digest());
  CHECK(back.threshold(2) == kInf);
  CHECK(back.threshold(1) == -kInf);
  CHECK(t.digest().size() == 16);
  auto u = t;
  u.per_relation[0] = 1.5000001;
  CHECK(u.digest() != t.digest());
  u = t;
  u.use_per_relation = false;
  CHECK(u.digest() != t.digest());
  CHECK(u.threshold(0) == 0.25);
}

TEST_CASE("ookb vector: identity transition, avg pooling") {
  // Entities 0..2 known, 3 OOKB.
  const std::vector<Triplet> train = {{0, 0, 1}, {1, 0, 2}};
  const auto g = KnowledgeGraph::build(train, 3);
  Model m(fixtures::propagation(3, 1, PropagationMode::Unrolled, Pooling::Avg, TransitionKind::Identity), 3, 1, 2);
  const auto& base = m.entity_embeddings().value;

  auto one = OokbContext::build({{0, 0, 3}}, {3});
  ModelScorer<double> s1(m, g, &one);
  CHECK(s1.ookb_vector(3) == base.col(0));
  CHECK_THROWS_AS(s1.ookb_vector(1), InferenceError);

  auto two = OokbContext::build({{0, 0, 3}, {3, 0, 2}}, {3});
  ModelScorer<double> s2(m, g, &two);
  const Vec mean = (base.col(0) + base.col(2)) / 2;
  const Vec got = s2.ookb_vector(3);
  for (int i = 0; i < 3; ++i) CHECK(got(i) == doctest::Approx(mean(i)));

  CHECK_THROWS_AS(OokbContext::build({{0, 0, 1}}, {3}), DataError);
  CHECK_THROWS_AS(OokbContext::build({{3, 0, 3}}, {3}), DataError);
}

TEST_CASE("ookb vector: trained relation-relu-bn model matches a step-by-step forward pass") {
  std::mt19937_64 rng(73);
  const auto train = fixtures::random_graph(rng, 8, 2, 20);
  const auto g = KnowledgeGraph::build(train, 8);
  auto cfg = fixtures::propagation(4, 1, PropagationMode::Unrolled, Pooling::Avg, TransitionKind::RelationReluBn);
  Model m(cfg, 8, 2, 3);
  TrainConfig tc;
  tc.epochs = 5;
  tc.minibatch = 8;
  tc.tau = 2;
  tc.checkpoint_every = 0;
  Trainer<double>(m, g, tc).train();

  // OOKB entity 8: head neighbor 1 via r0, tail neighbors 4 via r1 and 6 via r0.
  const std::vector<Triplet> aux = {{1, 0, 8}, {8, 1, 4}, {8, 0, 6}};
  auto ctx = OokbContext::build(aux, {8});
  ModelScorer<double> scorer(m, g, &ctx);
  const Vec got = scorer.ookb_vector(8);

  // Independent forward pass with explicit element loops.
  const auto& base = m.entity_embeddings().value;
  auto transition = [&](EntityId src, RelationId r, Direction dir) {
    const auto& a = m.params()[m.matrix_handle(r, dir, 0)].value;
    const auto& bn = m.batchnorm_state(r, dir, 0);
    Vec out(4);
    for (int i = 0; i < 4; ++i) {
      double x = 0;
      for (int j = 0; j < 4; ++j) x += a(i, j) * base(j, src);
      const double mean = m.params()[bn.running_mean].value(i, 0);
      const double var = m.params()[bn.running_var].value(i, 0);
      const double y = (x - mean) / std::sqrt(var + cfg.bn_epsilon) * m.params()[bn.gamma].value(i, 0) +
                       m.params()[bn.beta].value(i, 0);
      out(i) = y > 0 ? y : 0;
    }
    return out;
  };
  const Vec expect =
      (transition(1, 0, Direction::Head) + transition(4, 1, Direction::Tail) + transition(6, 0, Direction::Tail)) / 3;
  for (int i = 0; i < 4; ++i) CHECK(got(i) == doctest::Approx(expect(i)).epsilon(1e-12));
  // Running statistics moved away from their initial values during training.
  CHECK(m.params()[m.batchnorm_state(0, Direction::Head, 0).running_var].value != Eigen::MatrixXd::Ones(4, 1));
}

TEST_CASE("model scorer: results do not depend on the worker count") {
  std::mt19937_64 rng(79);
  const auto train = fixtures::random_graph(rng, 20, 3, 60);
  const auto g = KnowledgeGraph::build(train, 20);
  Model m(fixtures::propagation(4, 2, PropagationMode::Stacked, Pooling::Max, TransitionKind::RelationReluBn), 20, 3, 1);
  const auto queries = fixtures::random_graph(rng, 20, 3, 100);
  ModelScorer<double> one(m, g, nullptr, 5, 1), four(m, g, nullptr, 5, 4);
  CHECK(one(queries) == four(queries));
}

TEST_CASE("baseline: implied positions") {
  auto m = transe(3, 4, 2);
  const auto& e = m.entity_embeddings().value;
  const auto& r = m.relation_embeddings().value;
  auto single = OokbContext::build({{0, 1, 3}}, {3});
  for (auto p : {Pooling::Sum, Pooling::Avg, Pooling::Max})
    CHECK(baseline_ookb_vector(3, single, p, m) == Vec(e.col(0) + r.col(1)));
  CHECK(baseline_ookb_vector(3, single, Pooling::Avg, m, BaselineVariant::RawNeighbor) == Vec(e.col(0)));

  auto two = OokbContext::build({{0, 0, 3}, {3, 1, 2}}, {3});
  const Vec expect = ((e.col(0) + r.col(0)) + (e.col(2) - r.col(1))) / 2;
  const Vec got = baseline_ookb_vector(3, two, Pooling::Avg, m);
  for (int i = 0; i < 3; ++i) CHECK(got(i) == doctest::Approx(expect(i)));
  const Vec mx = baseline_ookb_vector(3, two, Pooling::Max, m);
  CHECK(mx == Vec((e.col(0) + r.col(0)).cwiseMax(e.col(2) - r.col(1))));
  CHECK_THROWS_AS(baseline_ookb_vector(1, two, Pooling::Avg, m), InferenceError);
}

TEST_CASE("baseline: exact-fit embeddings score the aux triplets at zero") {
  auto m = transe(2, 5, 2);
  auto& e = m.entity_embeddings().value;
  auto& r = m.relation_embeddings().value;
  // Dyadic values keep every sum exact.
  r.col(0) << 1, 0;
  r.col(1) << 0, 0.5;
  const Vec u = (Vec(2) << 0.25, -1).finished();
  e.col(0) = u - r.col(0);  // (0, r0, u)
  e.col(1) = u + r.col(1);  // (u, r1, 1)
  e.col(2) = u - r.col(1);  // (2, r1, u)
  e.col(3) << 9, 9;
  const std::vector<Triplet> aux = {{0, 0, 4}, {4, 1, 1}, {2, 1, 4}};
  auto ctx = OokbContext::build(aux, {4});
  for (auto p : {Pooling::Sum, Pooling::Avg, Pooling::Max}) {
    if (p != Pooling::Sum) CHECK(baseline_ookb_vector(4, ctx, p, m) == u);
  }
  BaselineScorer<double> scorer(m, ctx, Pooling::Avg);
  for (double s : scorer(aux)) CHECK(s == 0.0);
  const Triplet far[] = {{3, 0, 4}};
  CHECK(scorer(far)[0] > 1);
}

TEST_CASE("evaluation: OOKB scoring agrees with standard scoring where the graphs coincide") {
  // Known entities 0..5, OOKB entity 6 linked to 0 and 1 only. Entities 2..5
  // do not touch 6, so their propagated vectors are the same whether 6's
  // triplets sit in training or in aux.
  const std::vector<Triplet> train = {{0, 0, 1}, {1, 0, 2}, {2, 1, 3}, {3, 0, 4}, {4, 1, 5}, {5, 0, 2}, {3, 1, 2}};
  const std::vector<Triplet> aux = {{0, 1, 6}, {6, 0, 1}};
  auto all = train;
  all.insert(all.end(), aux.begin(), aux.end());
  const auto g_all = KnowledgeGraph::build(all, 7);
  const auto g_train = KnowledgeGraph::build(train, 7);

  auto cfg = fixtures::propagation(4, 1, PropagationMode::Unrolled, Pooling::Avg, TransitionKind::RelationReluBn);
  Model m(cfg, 7, 2, 4);
  TrainConfig tc;
  tc.epochs = 30;
  tc.minibatch = 9;
  tc.tau = 2;
  tc.checkpoint_every = 0;
  tc.adam.alpha1 = 0.05;
  Trainer<double>(m, g_all, tc).train();

  OokbSplit split;
  split.train = train;
  split.aux = aux;
  split.ookb_entities = {6};
  split.test = {{{6, 0, 2}, true}, {{6, 1, 3}, false}, {{4, 0, 6}, true}, {{5, 1, 6}, false}};
  split.validation = {{{2, 1, 3}, true}, {{3, 0, 2}, false}, {{4, 1, 5}, true}, {{5, 1, 4}, false}};

  auto ctx = OokbContext::build(split.aux, split.ookb_entities);
  ModelScorer<double> standard(m, g_all), ookb(m, g_train, &ctx);
  const auto test = strip_labels(split.test);
  const auto a = standard(test), b = ookb(test);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  const auto thresholds = tune_thresholds(split.validation, ookb.as_scorer(), 2);
  const auto same = tune_thresholds(split.validation, standard.as_scorer(), 2);
  CHECK(thresholds.digest() == same.digest());
  CHECK(evaluate_ookb(split, ookb.as_scorer(), thresholds) == accuracy(split.test, same, a));

  split.test.clear();
  CHECK_THROWS_AS(evaluate_ookb(split, ookb.as_scorer(), thresholds), DataError);
}

TEST_CASE("evaluate_classification and summary") {
  auto m = transe(2, 4, 1);
  auto& e = m.entity_embeddings().value;
  m.relation_embeddings().value.col(0) << 1, 0;
  e.col(0) << 0, 0;
  e.col(1) << 1, 0;
  e.col(2) << 2, 0;
  e.col(3) << 0, 3;
  const auto g = KnowledgeGraph::build(std::vector<Triplet>{{0, 0, 1}}, 4);
  ModelScorer<double> scorer(m, g);
  const std::vector<LabeledTriplet> valid = {{{0, 0, 1}, true}, {{0, 0, 3}, false}};
  const std::vector<LabeledTriplet> test = {{{1, 0, 2}, true}, {{3, 0, 2}, false}, {{2, 0, 3}, false}};
  auto rec = evaluate_classification(valid, test, scorer.as_scorer(), 1);
  CHECK(rec.accuracy == 1.0);
  CHECK(rec.validation_accuracy == 1.0);
  CHECK(rec.n_test == 3);
  rec.dataset = "toy";
  rec.method = "transe";
  rec.pooling = "avg";
  const auto j = rec.to_json();
  CHECK(j.at("accuracy") == 1.0);
  CHECK(j.at("nTest") == 3);
  CHECK(j.at("thresholdTableDigest").get<std::string>().size() == 16);
  const EvalRecord records[] = {rec};
  CHECK(format_summary(records).find("toy") != std::string::npos);
  CHECK(format_summary(records).find("100.00%") != std::string::npos);
  CHECK_THROWS_AS(evaluate_classification(valid, {}, scorer.as_scorer(), 1), DataError);
}

#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "ookb/dataset_gen.hpp"
#include "ookb/errors.hpp"

using namespace ookb;

namespace {

std::vector<LabeledTriplet> labeled(ookb::Vocabularies& v, const std::vector<std::array<std::string, 4>>& rows) {
  std::vector<LabeledTriplet> out;
  for (const auto& [h, r, t, l] : rows)
    out.push_back({{v.entities.intern(h), v.relations.intern(r), v.entities.intern(t)}, l == "1"});
  return out;
}

// Direct restatement of the construction, written independently of the
// library: candidate set from the first n lines; OOKB = candidates with some
// training edge to a non-candidate; partition by number of OOKB endpoints.
struct Oracle {
  std::set<EntityId> ookb;
  std::vector<Triplet> kept, aux, discarded;
  std::vector<LabeledTriplet> test, validation;
};

Oracle oracle(const std::vector<Triplet>& train, const std::vector<LabeledTriplet>& valid,
              const std::vector<LabeledTriplet>& test, std::size_t n, OokbPosition pos) {
  std::set<EntityId> cand;
  for (std::size_t i = 0; i < n; ++i) {
    if (pos == OokbPosition::Head || pos == OokbPosition::Both) cand.insert(test[i].triplet.head);
    if (pos == OokbPosition::Tail || pos == OokbPosition::Both) cand.insert(test[i].triplet.tail);
  }
  Oracle o;
  for (auto c : cand)
    for (const auto& t : train) {
      const bool touches = t.head == c || t.tail == c;
      const EntityId other = t.head == c ? t.tail : t.head;
      if (touches && cand.count(other) == 0) o.ookb.insert(c);
    }
  auto in = [&](EntityId e) { return o.ookb.count(e) ? 1 : 0; };
  for (const auto& t : train) {
    const int k = in(t.head) + in(t.tail);
    if (k == 0) o.kept.push_back(t);
    if (k == 1) o.aux.push_back(t);
    if (k == 2) o.discarded.push_back(t);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (in(test[i].triplet.head) + in(test[i].triplet.tail) > 0) o.test.push_back(test[i]);
  for (const auto& v : valid)
    if (in(v.triplet.head) + in(v.triplet.tail) == 0) o.validation.push_back(v);
  return o;
}

std::vector<LabeledTriplet> random_labeled(std::mt19937_64& rng, int n, int k, int m) {
  std::vector<LabeledTriplet> out;
  std::uniform_int_distribution<int> ent(0, n - 1), rel(0, k - 1);
  for (int i = 0; i < m; ++i) out.push_back({{ent(rng), rel(rng), ent(rng)}, i % 2 == 0});
  return out;
}

struct ToyCorpus {
  Vocabularies v;
  std::vector<Triplet> train;
  std::vector<LabeledTriplet> valid, test;
  ToyCorpus() {
    train = fixtures::named(v, {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "s", "d"}});
    test = labeled(v, {{"a", "r", "c", "1"}, {"b", "s", "d", "-1"}, {"c", "r", "a", "1"}});
    valid = labeled(v, {{"a", "r", "d", "1"}, {"b", "r", "d", "-1"}, {"c", "s", "b", "1"}});
  }
  EntityId e(const char* s) const { return v.entities.at(s); }
};

}  // namespace

TEST_CASE("choose_candidates") {
  Vocabularies v;
  const auto test = labeled(v, {{"a", "r", "b", "1"}, {"c", "r", "d", "-1"}});
  const auto a = v.entities.at("a"), b = v.entities.at("b"), c = v.entities.at("c"), d = v.entities.at("d");
  CHECK(choose_candidates(test, 2, OokbPosition::Head) == std::set<EntityId>{a, c});
  CHECK(choose_candidates(test, 2, OokbPosition::Tail) == std::set<EntityId>{b, d});
  CHECK(choose_candidates(test, 2, OokbPosition::Both) == std::set<EntityId>{a, b, c, d});
  CHECK(choose_candidates(test, 1, OokbPosition::Both) == std::set<EntityId>{a, b});
  CHECK_THROWS_AS(choose_candidates(test, 3, OokbPosition::Head), ConfigError);
}

TEST_CASE("finalize_ookb") {
  Vocabularies v;
  const auto train = fixtures::named(v, {{"a", "r", "b"}});
  const auto a = v.entities.at("a"), b = v.entities.at("b");
  CHECK(finalize_ookb({a}, train) == std::set<EntityId>{a});
  CHECK(finalize_ookb({a, b}, train).empty());
}

TEST_CASE("split_training") {
  Vocabularies v;
  const auto train = fixtures::named(v, {{"a", "r", "b"}});
  const auto a = v.entities.at("a"), b = v.entities.at("b");
  auto p = split_training(train, {});
  CHECK(p.kept == train);
  CHECK(p.aux.empty());
  CHECK(p.discarded.empty());
  p = split_training(train, {a, b});
  CHECK(p.kept.empty());
  CHECK(p.aux.empty());
  CHECK(p.discarded == train);
}

TEST_CASE("filter_eval_sets with no OOKB entity") {
  ToyCorpus c;
  const auto e = filter_eval_sets(c.test, c.valid, 3, {});
  CHECK(e.test.empty());
  CHECK(e.validation == c.valid);
}

TEST_CASE("toy corpus: Head-1 by hand") {
  ToyCorpus c;
  const auto s = generate_ookb_split(c.train, c.valid, c.test, 1, OokbPosition::Head);
  CHECK(s.ookb_entities == std::set<EntityId>{c.e("a")});
  CHECK(s.train == std::vector<Triplet>{c.train[1], c.train[2]});
  CHECK(s.aux == std::vector<Triplet>{c.train[0]});
  CHECK(s.test == std::vector<LabeledTriplet>{c.test[0]});
  CHECK(s.validation == std::vector<LabeledTriplet>{c.valid[1], c.valid[2]});
  CHECK(s.stats.aux_entities == 1);
  CHECK(s.stats.aux_entities_all == 2);
  CHECK(s.stats.candidate_entities == 1);
  CHECK(check_split_invariants(s).empty());
}

TEST_CASE("toy corpus: Both-2 has no OOKB entity") {
  ToyCorpus c;
  const auto s = generate_ookb_split(c.train, c.valid, c.test, 2, OokbPosition::Both);
  CHECK(s.ookb_entities.empty());
  CHECK(s.train == c.train);
  CHECK(s.test.empty());
  CHECK(s.validation == c.valid);
}

TEST_CASE("toy corpus: Head-2 leaves an aux endpoint without training triplets") {
  ToyCorpus c;
  const auto s = generate_ookb_split(c.train, c.valid, c.test, 2, OokbPosition::Head);
  CHECK(s.ookb_entities == std::set<EntityId>{c.e("b")});
  CHECK(s.train == std::vector<Triplet>{c.train[2]});
  CHECK(s.aux == std::vector<Triplet>{c.train[0], c.train[1]});
  CHECK(s.test == std::vector<LabeledTriplet>{c.test[1]});
  CHECK(s.validation == std::vector<LabeledTriplet>{c.valid[0]});
  // 'a' is linked only to the OOKB entity 'b', so it is absent from training.
  CHECK(check_split_invariants(s).find("non-OOKB endpoint") != std::string::npos);
}

TEST_CASE("n = 0 is a usage error") {
  ToyCorpus c;
  CHECK_THROWS_AS(generate_ookb_split(c.train, c.valid, c.test, 0, OokbPosition::Head), ConfigError);
}

TEST_CASE("position names") {
  CHECK(parse_position("head") == OokbPosition::Head);
  CHECK(parse_position("Both") == OokbPosition::Both);
  CHECK_THROWS_AS(parse_position("middle"), ConfigError);
  CHECK(split_name(OokbPosition::Tail, 3000) == "Tail-3000");
}

TEST_CASE("property: generator matches the brute-force oracle on random corpora") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int n_ent = 4 + trial % 30;
    const auto train = fixtures::random_graph(rng, n_ent, 3, 5 + trial % 60);
    const auto valid = random_labeled(rng, n_ent, 3, 10 + trial % 20);
    const auto test = random_labeled(rng, n_ent, 3, 10 + trial % 20);
    const std::size_t n = 1 + static_cast<std::size_t>(trial) % test.size();
    for (auto pos : {OokbPosition::Head, OokbPosition::Tail, OokbPosition::Both}) {
      const auto s = generate_ookb_split(train, valid, test, n, pos);
      const auto o = oracle(train, valid, test, n, pos);
      CHECK(s.ookb_entities == o.ookb);
      CHECK(s.train == o.kept);
      CHECK(s.aux == o.aux);
      CHECK(s.test == o.test);
      CHECK(s.validation == o.validation);
      // Partition property.
      CHECK(s.stats.training_triplets + s.stats.aux_triplets + s.stats.discarded_triplets == train.size());
      // Invariants that hold for every input.
      for (const auto& t : s.train) CHECK((s.ookb_entities.count(t.head) + s.ookb_entities.count(t.tail)) == 0);
      for (const auto& t : s.aux) CHECK((s.ookb_entities.count(t.head) + s.ookb_entities.count(t.tail)) == 1);
      for (const auto& t : s.test)
        CHECK((s.ookb_entities.count(t.triplet.head) + s.ookb_entities.count(t.triplet.tail)) >= 1);
      for (const auto& t : s.validation)
        CHECK((s.ookb_entities.count(t.triplet.head) + s.ookb_entities.count(t.triplet.tail)) == 0);
    }
  }
}

TEST_CASE("property: candidate sets grow with n") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto test = random_labeled(rng, 50, 3, 60);
    for (auto pos : {OokbPosition::Head, OokbPosition::Tail, OokbPosition::Both}) {
      const auto c10 = choose_candidates(test, 10, pos);
      const auto c30 = choose_candidates(test, 30, pos);
      const auto c50 = choose_candidates(test, 50, pos);
      CHECK(std::includes(c30.begin(), c30.end(), c10.begin(), c10.end()));
      CHECK(std::includes(c50.begin(), c50.end(), c30.begin(), c30.end()));
    }
  }
}

TEST_CASE("write_split is deterministic and read_split round-trips") {
  std::mt19937_64 rng(21);
  Vocabularies v;
  for (int i = 0; i < 40; ++i) v.entities.intern("ent" + std::to_string(i));
  for (int i = 0; i < 3; ++i) v.relations.intern("rel" + std::to_string(i));
  const auto train = fixtures::random_graph(rng, 40, 3, 150);
  const auto valid = random_labeled(rng, 40, 3, 30);
  const auto test = random_labeled(rng, 40, 3, 30);
  const auto split = generate_ookb_split(train, valid, test, 10, OokbPosition::Both);

  fixtures::TempDir a("split-a"), b("split-b");
  write_split(a.path().string(), "Both-10", split, v);
  write_split(b.path().string(), "Both-10", generate_ookb_split(train, valid, test, 10, OokbPosition::Both), v);
  for (auto ext : {".train.txt", ".aux.txt", ".valid.txt", ".test.txt", ".ookb.txt", ".stats.txt", ".stats.json"})
    CHECK(read_file(a.file(std::string("Both-10") + ext)) == read_file(b.file(std::string("Both-10") + ext)));
  CHECK(read_file(a.file("Both-10.stats.txt")).find("ookb_entities=" + std::to_string(split.ookb_entities.size())) !=
        std::string::npos);

  auto w = v;
  const auto back = read_split(a.path().string(), "Both-10", w);
  CHECK(w.entities.size() == v.entities.size());
  CHECK(back.train == split.train);
  CHECK(back.aux == split.aux);
  CHECK(back.test == split.test);
  CHECK(back.validation == split.validation);
  CHECK(back.ookb_entities == split.ookb_entities);
}

#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "ookb/errors.hpp"
#include "ookb/knowledge_graph.hpp"
#include "ookb/triplet_io.hpp"

using namespace ookb;

TEST_CASE("vocabulary interns densely in first-seen order") {
  Vocabulary v;
  CHECK(v.intern("b") == 0);
  CHECK(v.intern("a") == 1);
  CHECK(v.intern("b") == 0);
  CHECK(v.size() == 2);
  CHECK(v.find("a") == 1);
  CHECK_FALSE(v.find("zz").has_value());
  CHECK_THROWS_AS(v.at("zz"), DataError);
  CHECK(v.name(1) == "a");
}

TEST_CASE("vocabulary save/load keeps ids") {
  fixtures::TempDir dir("vocab");
  Vocabulary v;
  for (auto s : {"x", "y", "z_1", "w.2"}) v.intern(s);
  v.save(dir.file("v.txt"));
  const auto back = Vocabulary::load(dir.file("v.txt"));
  CHECK(back.names() == v.names());
  CHECK(back.at("z_1") == 2);
}

TEST_CASE("parse: unlabeled single line") {
  Vocabularies v;
  const auto t = parse_triplets("a\tr\tb", false, v);
  REQUIRE(t.size() == 1);
  CHECK(t[0].positive);
  CHECK(v.entities.name(t[0].triplet.head) == "a");
  CHECK(v.relations.name(t[0].triplet.relation) == "r");
  CHECK(v.entities.name(t[0].triplet.tail) == "b");
}

TEST_CASE("parse: negative label") {
  Vocabularies v;
  const auto t = parse_triplets("a\tr\tb\t-1\n", true, v);
  REQUIRE(t.size() == 1);
  CHECK_FALSE(t[0].positive);
}

TEST_CASE("parse: malformed input is rejected with the line number") {
  Vocabularies v;
  CHECK_THROWS_AS(parse_triplets("a\tr\tb\n\nc\tr\td\n", false, v), ParseError);
  try {
    parse_triplets("a\tr\tb\t1\nc\tr\td\t0\n", true, v, "f.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("f.txt:2") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(parse_triplets("a\tr\tb\n", true, v), doctest::Contains("missing label"), ParseError);
  CHECK_THROWS_AS(parse_triplets("a\tr\n", false, v), ParseError);
  CHECK_THROWS_AS(parse_triplets("a\t\tb\n", false, v), ParseError);
  CHECK_THROWS_AS(parse_triplets("a\tr\tb\t1\n", false, v), ParseError);
}

TEST_CASE("parse: load summary counts duplicates and labels") {
  Vocabularies v;
  LoadSummary s;
  parse_triplets("a\tr\tb\t1\na\tr\tb\t1\nc\tr\tb\t-1\n", true, v, "x", &s);
  CHECK(s.lines == 3);
  CHECK(s.positives == 2);
  CHECK(s.negatives == 1);
  CHECK(s.duplicates == 1);
  CHECK(s.new_entities == 3);
  CHECK(s.new_relations == 1);
}

TEST_CASE("load then save round-trips byte-identically") {
  fixtures::TempDir dir("roundtrip");
  const std::string text = "x\tr1\ty\t1\ny\tr2\tz\t-1\nz\tr1\tx\t1\n";
  write_file(dir.file("in.txt"), text);
  Vocabularies v;
  const auto t = load_triplet_file(dir.file("in.txt"), true, v);
  save_triplet_file(dir.file("out.txt"), t, true, v);
  CHECK(read_file(dir.file("out.txt")) == text);

  // A missing final newline is accepted on input and always written on output.
  Vocabularies w;
  const auto u = parse_triplets("x\tr1\ty", false, w);
  CHECK(format_triplets(u, false, w) == "x\tr1\ty\n");
}

TEST_CASE("missing file is a data error") {
  Vocabularies v;
  CHECK_THROWS_AS(load_triplet_file("/nonexistent/ookb/file.txt", false, v), DataError);
}

TEST_CASE("build_graph: one edge") {
  Vocabularies v;
  const auto t = fixtures::named(v, {{"a", "r", "b"}});
  const auto g = KnowledgeGraph::build(t);
  const auto a = v.entities.at("a"), b = v.entities.at("b");
  REQUIRE(g.head_neighbors(b).size() == 1);
  CHECK(g.head_neighbors(b)[0] == t[0]);
  REQUIRE(g.tail_neighbors(a).size() == 1);
  CHECK(g.tail_neighbors(a)[0] == t[0]);
  CHECK(g.head_neighbors(a).empty());
}

TEST_CASE("build_graph: duplicates collapse") {
  Vocabularies v;
  const auto t = fixtures::named(v, {{"a", "r", "b"}, {"a", "r", "b"}});
  const auto g = KnowledgeGraph::build(t);
  CHECK(g.size() == 1);
  CHECK(g.duplicates_collapsed() == 1);
}

TEST_CASE("build_graph: two head neighbors") {
  Vocabularies v;
  const auto t = fixtures::named(v, {{"a", "r", "b"}, {"c", "s", "b"}});
  const auto g = KnowledgeGraph::build(t);
  CHECK(g.head_neighbors(v.entities.at("b")).size() == 2);
  CHECK(g.contains(t[1]));
  CHECK_FALSE(g.contains({t[1].tail, t[1].relation, t[1].head}));
}

TEST_CASE("build_graph: ids beyond the graph get empty neighborhoods") {
  const std::vector<Triplet> t = {{0, 0, 1}};
  const auto g = KnowledgeGraph::build(t, 5);
  CHECK(g.index_size() == 5);
  CHECK(g.degree(4) == 0);
  CHECK(g.head_neighbors(99).empty());
}

TEST_CASE("entities_of / relations_of") {
  Vocabularies v;
  const auto one = fixtures::named(v, {{"a", "r", "b"}});
  CHECK(entities_of(one) == std::set<EntityId>{v.entities.at("a"), v.entities.at("b")});
  CHECK(relations_of(one) == std::set<RelationId>{v.relations.at("r")});
  CHECK(entities_of(std::vector<Triplet>{}).empty());
  CHECK(relations_of(KnowledgeGraph{}).empty());

  Vocabularies w;
  const auto chain = fixtures::named(w, {{"a", "r", "b"}, {"b", "s", "c"}});
  CHECK(entities_of(KnowledgeGraph::build(chain)).size() == 3);
  const auto three = fixtures::named(w, {{"a", "r", "b"}, {"b", "r", "c"}, {"a", "s", "c"}});
  CHECK(relations_of(three) == std::set<RelationId>{w.relations.at("r"), w.relations.at("s")});
}

TEST_CASE("property: neighborhoods index exactly the graph") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto t = fixtures::random_graph(rng, 2 + trial % 15, 1 + trial % 4, 1 + trial % 40);
    // Add duplicates to exercise collapsing.
    for (std::size_t i = 0; i < t.size(); i += 3) t.push_back(t[i]);
    const auto g = KnowledgeGraph::build(t);
    std::size_t heads = 0, tails = 0;
    for (EntityId e = 0; e < g.index_size(); ++e) {
      for (const auto& x : g.head_neighbors(e)) CHECK(x.tail == e);
      for (const auto& x : g.tail_neighbors(e)) CHECK(x.head == e);
      heads += g.head_neighbors(e).size();
      tails += g.tail_neighbors(e).size();
    }
    CHECK(heads == g.size());
    CHECK(tails == g.size());
    for (const auto& x : t) CHECK(g.contains(x));
    CHECK(g.size() + g.duplicates_collapsed() == t.size());
  }
}

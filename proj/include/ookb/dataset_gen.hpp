#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ookb/knowledge_graph.hpp"
#include "ookb/triplet.hpp"
#include "ookb/triplet_io.hpp"

namespace ookb {

// Where OOKB candidates are taken from in the first N test triplets.
enum class OokbPosition { Head, Tail, Both };

std::string_view to_string(OokbPosition p);
OokbPosition parse_position(std::string_view s);

struct SplitStats {
  std::size_t training_triplets = 0;
  std::size_t validation_triplets = 0;
  std::size_t test_triplets = 0;
  std::size_t aux_triplets = 0;
  std::size_t discarded_triplets = 0;
  std::size_t ookb_entities = 0;
  std::size_t candidate_entities = 0;
  // Distinct non-OOKB entities occurring in aux.
  std::size_t aux_entities = 0;
  // Distinct entities (OOKB included) occurring in aux.
  std::size_t aux_entities_all = 0;

  // `key=value` lines, one per field.
  std::string to_text() const;
  std::string to_json() const;
};

struct OokbSplit {
  std::vector<Triplet> train;
  std::vector<Triplet> aux;
  std::set<EntityId> ookb_entities;
  std::vector<LabeledTriplet> validation;
  std::vector<LabeledTriplet> test;
  SplitStats stats;

  KnowledgeGraph train_graph(EntityId num_entities = 0) const { return KnowledgeGraph::build(train, num_entities); }
};

// Heads / tails / both endpoints of the first n lines of the test file.
std::set<EntityId> choose_candidates(const std::vector<LabeledTriplet>& test_file, std::size_t n,
                                     OokbPosition position);

// Candidates linked by some training triplet to an entity outside the candidate set.
std::set<EntityId> finalize_ookb(const std::set<EntityId>& candidates, const std::vector<Triplet>& train);

struct TrainingPartition {
  std::vector<Triplet> kept;       // no OOKB endpoint
  std::vector<Triplet> aux;        // exactly one
  std::vector<Triplet> discarded;  // two
};

TrainingPartition split_training(const std::vector<Triplet>& train, const std::set<EntityId>& ookb);

struct EvalSets {
  std::vector<LabeledTriplet> test;
  std::vector<LabeledTriplet> validation;
};

EvalSets filter_eval_sets(const std::vector<LabeledTriplet>& test_file, const std::vector<LabeledTriplet>& valid_file,
                          std::size_t n, const std::set<EntityId>& ookb);

OokbSplit generate_ookb_split(const std::vector<Triplet>& train, const std::vector<LabeledTriplet>& valid_file,
                              const std::vector<LabeledTriplet>& test_file, std::size_t n, OokbPosition position);

// Returns a description of the first violated OokbSplit invariant, or empty.
std::string check_split_invariants(const OokbSplit& split);

// `{position}-{n}`, e.g. "Head-1000".
std::string split_name(OokbPosition position, std::size_t n);

// Writes {name}.train.txt, .aux.txt, .valid.txt, .test.txt, .ookb.txt (entity
// names) and .stats.txt / .stats.json into out_dir.
void write_split(const std::string& out_dir, const std::string& name, const OokbSplit& split,
                 const Vocabularies& vocab);

// Reads back what write_split produced, interning into `vocab`.
OokbSplit read_split(const std::string& dir, const std::string& name, Vocabularies& vocab);

}  // namespace ookb

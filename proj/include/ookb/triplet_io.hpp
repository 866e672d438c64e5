#pragma once

#include <string>
#include <vector>

#include "ookb/triplet.hpp"
#include "ookb/vocabulary.hpp"

namespace ookb {

// Entity and relation interning shared by every file of a run.
struct Vocabularies {
  Vocabulary entities;
  Vocabulary relations;
};

struct LoadSummary {
  std::size_t lines = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t duplicates = 0;
  std::size_t new_entities = 0;
  std::size_t new_relations = 0;
};

// One triplet per line: head\trelation\ttail[\tlabel], label in {1, -1}.
// Blank lines are errors. The final newline is optional. Unlabeled files
// yield positive triplets.
std::vector<LabeledTriplet> load_triplet_file(const std::string& path, bool labeled, Vocabularies& vocab,
                                              LoadSummary* summary = nullptr);

// Same grammar, parsing from memory. `source` names the input in errors.
std::vector<LabeledTriplet> parse_triplets(const std::string& text, bool labeled, Vocabularies& vocab,
                                           const std::string& source = "<memory>", LoadSummary* summary = nullptr);

// Every line, including the last, ends with '\n'.
std::string format_triplets(const std::vector<LabeledTriplet>& triplets, bool labeled, const Vocabularies& vocab);
void save_triplet_file(const std::string& path, const std::vector<LabeledTriplet>& triplets, bool labeled,
                       const Vocabularies& vocab);

std::vector<Triplet> strip_labels(const std::vector<LabeledTriplet>& triplets);
std::vector<LabeledTriplet> as_positive(const std::vector<Triplet>& triplets);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace ookb

#include "ookb/dataset_gen.hpp"

#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "ookb/errors.hpp"

namespace ookb {

std::string_view to_string(OokbPosition p) {
  switch (p) {
    case OokbPosition::Head:
      return "Head";
    case OokbPosition::Tail:
      return "Tail";
    case OokbPosition::Both:
      return "Both";
  }
  return "?";
}

OokbPosition parse_position(std::string_view s) {
  if (s == "Head" || s == "head") return OokbPosition::Head;
  if (s == "Tail" || s == "tail") return OokbPosition::Tail;
  if (s == "Both" || s == "both") return OokbPosition::Both;
  throw ConfigError("unknown OOKB position '" + std::string(s) + "' (expected Head, Tail or Both)");
}

std::string split_name(OokbPosition position, std::size_t n) {
  return std::string(to_string(position)) + "-" + std::to_string(n);
}

std::string SplitStats::to_text() const {
  std::ostringstream os;
  os << "training_triplets=" << training_triplets << '\n'
     << "validation_triplets=" << validation_triplets << '\n'
     << "ookb_entities=" << ookb_entities << '\n'
     << "test_triplets=" << test_triplets << '\n'
     << "aux_entities=" << aux_entities << '\n'
     << "aux_triplets=" << aux_triplets << '\n'
     << "aux_entities_all=" << aux_entities_all << '\n'
     << "candidate_entities=" << candidate_entities << '\n'
     << "discarded_triplets=" << discarded_triplets << '\n';
  return os.str();
}

std::string SplitStats::to_json() const {
  nlohmann::ordered_json j;
  j["training_triplets"] = training_triplets;
  j["validation_triplets"] = validation_triplets;
  j["ookb_entities"] = ookb_entities;
  j["test_triplets"] = test_triplets;
  j["aux_entities"] = aux_entities;
  j["aux_triplets"] = aux_triplets;
  j["aux_entities_all"] = aux_entities_all;
  j["candidate_entities"] = candidate_entities;
  j["discarded_triplets"] = discarded_triplets;
  return j.dump();
}

std::set<EntityId> choose_candidates(const std::vector<LabeledTriplet>& test_file, std::size_t n,
                                     OokbPosition position) {
  if (n > test_file.size())
    throw ConfigError("n=" + std::to_string(n) + " exceeds the " + std::to_string(test_file.size()) +
                      " test triplets");
  std::set<EntityId> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = test_file[i].triplet;
    if (position != OokbPosition::Tail) out.insert(t.head);
    if (position != OokbPosition::Head) out.insert(t.tail);
  }
  return out;
}

std::set<EntityId> finalize_ookb(const std::set<EntityId>& candidates, const std::vector<Triplet>& train) {
  std::set<EntityId> out;
  for (const auto& t : train) {
    const bool h = candidates.count(t.head) != 0;
    const bool tl = candidates.count(t.tail) != 0;
    if (h && !tl) out.insert(t.head);
    if (tl && !h) out.insert(t.tail);
  }
  return out;
}

TrainingPartition split_training(const std::vector<Triplet>& train, const std::set<EntityId>& ookb) {
  TrainingPartition p;
  for (const auto& t : train) {
    const int hits = static_cast<int>(ookb.count(t.head)) + static_cast<int>(ookb.count(t.tail));
    (hits == 0 ? p.kept : hits == 1 ? p.aux : p.discarded).push_back(t);
  }
  return p;
}

namespace {

bool touches(const Triplet& t, const std::set<EntityId>& s) { return s.count(t.head) || s.count(t.tail); }

}  // namespace

EvalSets filter_eval_sets(const std::vector<LabeledTriplet>& test_file, const std::vector<LabeledTriplet>& valid_file,
                          std::size_t n, const std::set<EntityId>& ookb) {
  if (n > test_file.size()) throw ConfigError("n exceeds the number of test triplets");
  EvalSets out;
  for (std::size_t i = 0; i < n; ++i)
    if (touches(test_file[i].triplet, ookb)) out.test.push_back(test_file[i]);
  for (const auto& v : valid_file)
    if (!touches(v.triplet, ookb)) out.validation.push_back(v);
  return out;
}

OokbSplit generate_ookb_split(const std::vector<Triplet>& train, const std::vector<LabeledTriplet>& valid_file,
                              const std::vector<LabeledTriplet>& test_file, std::size_t n, OokbPosition position) {
  if (n == 0) throw ConfigError("n must be positive");
  const auto candidates = choose_candidates(test_file, n, position);
  OokbSplit split;
  split.ookb_entities = finalize_ookb(candidates, train);
  auto part = split_training(train, split.ookb_entities);
  auto eval = filter_eval_sets(test_file, valid_file, n, split.ookb_entities);
  split.train = std::move(part.kept);
  split.aux = std::move(part.aux);
  split.test = std::move(eval.test);
  split.validation = std::move(eval.validation);

  auto& s = split.stats;
  s.training_triplets = split.train.size();
  s.validation_triplets = split.validation.size();
  s.test_triplets = split.test.size();
  s.aux_triplets = split.aux.size();
  s.discarded_triplets = part.discarded.size();
  s.ookb_entities = split.ookb_entities.size();
  s.candidate_entities = candidates.size();
  const auto aux_entities = entities_of(split.aux);
  s.aux_entities_all = aux_entities.size();
  std::size_t ookb_in_aux = 0;
  for (auto e : aux_entities) ookb_in_aux += split.ookb_entities.count(e);
  s.aux_entities = aux_entities.size() - ookb_in_aux;
  return split;
}

std::string check_split_invariants(const OokbSplit& split) {
  const auto& ookb = split.ookb_entities;
  const auto train_entities = entities_of(split.train);
  for (const auto& t : split.train)
    if (touches(t, ookb)) return "training triplet touches an OOKB entity";
  for (const auto& t : split.aux) {
    const bool h = ookb.count(t.head) != 0;
    const bool tl = ookb.count(t.tail) != 0;
    if (h == tl) return "aux triplet does not contain exactly one OOKB entity";
    const EntityId known = h ? t.tail : t.head;
    if (train_entities.count(known) == 0) return "aux triplet's non-OOKB endpoint is not a training entity";
  }
  for (const auto& t : split.test)
    if (!touches(t.triplet, ookb)) return "test triplet contains no OOKB entity";
  for (const auto& t : split.validation)
    if (touches(t.triplet, ookb)) return "validation triplet contains an OOKB entity";
  const auto& s = split.stats;
  if (s.training_triplets != split.train.size() || s.aux_triplets != split.aux.size() ||
      s.test_triplets != split.test.size() || s.validation_triplets != split.validation.size() ||
      s.ookb_entities != ookb.size())
    return "stats do not match split contents";
  return {};
}

void write_split(const std::string& out_dir, const std::string& name, const OokbSplit& split,
                 const Vocabularies& vocab) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());
  const auto base = (fs::path(out_dir) / name).string();
  save_triplet_file(base + ".train.txt", as_positive(split.train), false, vocab);
  save_triplet_file(base + ".aux.txt", as_positive(split.aux), false, vocab);
  save_triplet_file(base + ".valid.txt", split.validation, true, vocab);
  save_triplet_file(base + ".test.txt", split.test, true, vocab);
  std::string names;
  for (auto e : split.ookb_entities) names += vocab.entities.name(e) + "\n";
  write_file(base + ".ookb.txt", names);
  write_file(base + ".stats.txt", split.stats.to_text());
  write_file(base + ".stats.json", split.stats.to_json() + "\n");
}

OokbSplit read_split(const std::string& dir, const std::string& name, Vocabularies& vocab) {
  const auto base = (std::filesystem::path(dir) / name).string();
  OokbSplit split;
  split.train = strip_labels(load_triplet_file(base + ".train.txt", false, vocab));
  split.aux = strip_labels(load_triplet_file(base + ".aux.txt", false, vocab));
  split.validation = load_triplet_file(base + ".valid.txt", true, vocab);
  split.test = load_triplet_file(base + ".test.txt", true, vocab);
  std::istringstream in(read_file(base + ".ookb.txt"));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) split.ookb_entities.insert(vocab.entities.intern(line));
  auto& s = split.stats;
  s.training_triplets = split.train.size();
  s.aux_triplets = split.aux.size();
  s.validation_triplets = split.validation.size();
  s.test_triplets = split.test.size();
  s.ookb_entities = split.ookb_entities.size();
  return split;
}

}  // namespace ookb

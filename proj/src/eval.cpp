#include "ookb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numeric>

namespace ookb {

double ThresholdTable::threshold(RelationId r) const {
  if (!use_per_relation) return global;
  auto it = per_relation.find(r);
  return it == per_relation.end() ? global : it->second;
}

std::string ThresholdTable::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  std::map<RelationId, double> sorted(per_relation.begin(), per_relation.end());
  for (const auto& [r, t] : sorted) {
    feed(&r, sizeof r);
    feed(&t, sizeof t);
  }
  feed(&global, sizeof global);
  const char flag = use_per_relation ? 1 : 0;
  feed(&flag, 1);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

nlohmann::json threshold_json(double t) {
  if (std::isinf(t)) return t > 0 ? "+inf" : "-inf";
  return t;
}

double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw DataError("bad threshold value " + s);
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json ThresholdTable::to_json() const {
  nlohmann::json rel = nlohmann::json::object();
  std::map<RelationId, double> sorted(per_relation.begin(), per_relation.end());
  for (const auto& [r, t] : sorted) rel[std::to_string(r)] = threshold_json(t);
  return {{"global", threshold_json(global)}, {"per_relation", rel}, {"use_per_relation", use_per_relation}};
}

ThresholdTable ThresholdTable::from_json(const nlohmann::json& j) {
  ThresholdTable t;
  t.global = threshold_from_json(j.at("global"));
  t.use_per_relation = j.value("use_per_relation", true);
  for (const auto& [k, v] : j.at("per_relation").items()) t.per_relation[std::stoi(k)] = threshold_from_json(v);
  return t;
}

ThresholdChoice best_threshold(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (scores.empty()) throw DataError("cannot tune a threshold on an empty set");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sweep thresholds upwards: below the first score everything is negative.
  const auto n = static_cast<double>(scores.size());
  std::size_t negatives = 0;
  for (bool l : labels) negatives += l ? 0 : 1;
  std::size_t correct = negatives;
  ThresholdChoice best{-std::numeric_limits<double>::infinity(), static_cast<double>(correct) / n};
  for (std::size_t i = 0; i < order.size();) {
    // Move every item with this score to the positive side at once.
    const double s = scores[order[i]];
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == s; ++j) {
      if (labels[order[j]]) {
        ++correct;
      } else {
        --correct;
      }
    }
    const double t = j < order.size() ? s + (scores[order[j]] - s) / 2 : std::numeric_limits<double>::infinity();
    const double acc = static_cast<double>(correct) / n;
    if (acc > best.accuracy) best = {t, acc};
    i = j;
  }
  return best;
}

ThresholdTable tune_thresholds(std::span<const LabeledTriplet> validation, std::span<const double> scores,
                               RelationId num_relations, bool per_relation) {
  if (validation.empty()) throw DataError("validation set is empty");
  if (validation.size() != scores.size()) throw DataError("validation scores misaligned");
  std::vector<bool> all_labels;
  std::map<RelationId, std::pair<std::vector<double>, std::vector<bool>>> by_rel;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    all_labels.push_back(validation[i].positive);
    auto& [s, l] = by_rel[validation[i].triplet.relation];
    s.push_back(scores[i]);
    l.push_back(validation[i].positive);
  }
  auto choose = [](const std::vector<double>& s, const std::vector<bool>& l) {
    std::unique_ptr<bool[]> flags(new bool[l.size()]);
    for (std::size_t i = 0; i < l.size(); ++i) flags[i] = l[i];
    return best_threshold(s, std::span<const bool>(flags.get(), l.size()));
  };
  ThresholdTable table;
  table.use_per_relation = per_relation;
  table.global = choose(std::vector<double>(scores.begin(), scores.end()), all_labels).threshold;
  for (const auto& [r, sl] : by_rel) table.per_relation[r] = choose(sl.first, sl.second).threshold;
  for (RelationId r = 0; r < num_relations; ++r) table.per_relation.emplace(r, table.global);
  return table;
}

ThresholdTable tune_thresholds(std::span<const LabeledTriplet> validation, const Scorer& scorer,
                               RelationId num_relations, bool per_relation) {
  if (validation.empty()) throw DataError("validation set is empty");
  const auto triplets = strip_labels({validation.begin(), validation.end()});
  const auto scores = scorer(triplets);
  return tune_thresholds(validation, scores, num_relations, per_relation);
}

double accuracy(std::span<const LabeledTriplet> test, std::span<const bool> predictions) {
  if (test.empty()) throw DataError("accuracy of an empty test set is undefined");
  if (test.size() != predictions.size()) throw DataError("predictions misaligned with test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += test[i].positive == predictions[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double accuracy(std::span<const LabeledTriplet> test, const ThresholdTable& table, std::span<const double> scores) {
  if (test.size() != scores.size()) throw DataError("scores misaligned with test set");
  std::unique_ptr<bool[]> predictions(new bool[test.size()]);
  for (std::size_t i = 0; i < test.size(); ++i) predictions[i] = classify(test[i].triplet, table, scores[i]);
  return accuracy(test, std::span<const bool>(predictions.get(), test.size()));
}

OokbContext OokbContext::build(const std::vector<Triplet>& aux_triplets, const std::set<EntityId>& ookb_entities) {
  OokbContext ctx;
  ctx.ookb.insert(ookb_entities.begin(), ookb_entities.end());
  for (const auto& t : aux_triplets) {
    const bool h = ctx.ookb.count(t.head) != 0;
    const bool tl = ctx.ookb.count(t.tail) != 0;
    if (h == tl)
      throw DataError("aux triplet (" + std::to_string(t.head) + ", " + std::to_string(t.relation) + ", " +
                      std::to_string(t.tail) + ") does not have exactly one OOKB endpoint");
  }
  ctx.aux = KnowledgeGraph::build(aux_triplets);
  return ctx;
}

nlohmann::json EvalRecord::to_json() const {
  return {{"datasetName", dataset},   {"method", method}, {"pooling", pooling},
          {"accuracy", accuracy},     {"nTest", n_test},  {"thresholdTableDigest", threshold_digest},
          {"validationAccuracy", validation_accuracy}};
}

EvalRecord evaluate_classification(std::span<const LabeledTriplet> validation, std::span<const LabeledTriplet> test,
                                   const Scorer& scorer, RelationId num_relations, bool per_relation) {
  if (test.empty()) throw DataError("test set is empty");
  const auto val_scores = scorer(strip_labels({validation.begin(), validation.end()}));
  const auto table = tune_thresholds(validation, val_scores, num_relations, per_relation);
  const auto test_scores = scorer(strip_labels({test.begin(), test.end()}));
  EvalRecord r;
  r.accuracy = accuracy(test, table, test_scores);
  r.validation_accuracy = accuracy(validation, table, val_scores);
  r.n_test = test.size();
  r.threshold_digest = table.digest();
  return r;
}

double evaluate_ookb(const OokbSplit& split, const Scorer& scorer, const ThresholdTable& thresholds) {
  if (split.test.empty()) throw DataError("OOKB split has an empty test set");
  const auto scores = scorer(strip_labels(split.test));
  return accuracy(split.test, thresholds, scores);
}

std::string format_summary(std::span<const EvalRecord> records) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-10s %-8s %8s %8s\n", "dataset", "method", "pooling", "accuracy", "n_test");
  out += line;
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%-16s %-10s %-8s %7.2f%% %8zu\n", r.dataset.c_str(), r.method.c_str(),
                  r.pooling.c_str(), 100 * r.accuracy, r.n_test);
    out += line;
  }
  return out;
}

}  // namespace ookb

#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ookb/dataset_gen.hpp"
#include "ookb/graph_model.hpp"
#include "ookb/knowledge_graph.hpp"

namespace ookb {

// Maps triplets to implausibility scores (lower = more plausible).
using Scorer = std::function<std::vector<double>(std::span<const Triplet>)>;

// Per-relation score cutoffs; a triplet is predicted positive iff its score
// is strictly below its relation's threshold.
struct ThresholdTable {
  std::unordered_map<RelationId, double> per_relation;
  double global = 0;
  bool use_per_relation = true;

  double threshold(RelationId r) const;
  // FNV-1a over the sorted (relation, threshold) pairs and the global value.
  std::string digest() const;
  nlohmann::json to_json() const;
  static ThresholdTable from_json(const nlohmann::json& j);
};

struct ThresholdChoice {
  double threshold = 0;
  double accuracy = 0;
};

// Exhaustive scan over -inf, midpoints between consecutive distinct scores,
// and +inf; ties go to the smallest threshold.
ThresholdChoice best_threshold(std::span<const double> scores, std::span<const bool> labels);

// `scores` aligns with `validation`. Relations absent from validation (ids
// below num_relations) get the global optimum.
ThresholdTable tune_thresholds(std::span<const LabeledTriplet> validation, std::span<const double> scores,
                               RelationId num_relations, bool per_relation = true);
ThresholdTable tune_thresholds(std::span<const LabeledTriplet> validation, const Scorer& scorer,
                               RelationId num_relations, bool per_relation = true);

inline bool classify(double score, double threshold) { return score < threshold; }
inline bool classify(const Triplet& t, const ThresholdTable& table, double score) {
  return classify(score, table.threshold(t.relation));
}

// Fraction of labels matched by predictions. Throws DataError on empty input.
double accuracy(std::span<const LabeledTriplet> test, std::span<const bool> predictions);
double accuracy(std::span<const LabeledTriplet> test, const ThresholdTable& table, std::span<const double> scores);

// Test-time auxiliary knowledge: aux triplets indexed as a graph plus the
// OOKB entity set. Each aux triplet must have exactly one OOKB endpoint.
struct OokbContext {
  KnowledgeGraph aux;
  std::unordered_set<EntityId> ookb;

  static OokbContext build(const std::vector<Triplet>& aux_triplets, const std::set<EntityId>& ookb_entities);
};

// Scores with a trained GraphModel. Known entities propagate over the
// training graph; OOKB entities (when an OokbContext is given) get vectors
// composed from their auxiliary neighborhoods. Scoring fans out over
// `workers` threads; results do not depend on the worker count.
template <typename Scalar>
class ModelScorer {
 public:
  ModelScorer(const GraphModel<Scalar>& model, const KnowledgeGraph& train, const OokbContext* ookb = nullptr,
              std::uint64_t seed = 0, unsigned workers = 1, const Vocabulary* names = nullptr)
      : model_(model),
        train_(train, model.config().neighbor_cap, mix_seed(seed, 0x6576616cULL)),
        workers_(std::max(1u, workers)) {
    ctx_.train = &train_;
    ctx_.entity_names = names;
    if (ookb != nullptr) {
      aux_.emplace(ookb->aux, model.config().neighbor_cap, mix_seed(seed, 0x617578ULL));
      ctx_.aux = &*aux_;
      ctx_.ookb = &ookb->ookb;
    }
  }
  ModelScorer(const ModelScorer&) = delete;
  ModelScorer& operator=(const ModelScorer&) = delete;

  const PropagationContext& context() const { return ctx_; }

  std::vector<double> operator()(std::span<const Triplet> triplets) const {
    if (workers_ == 1 || triplets.size() < 2 * workers_) return model_.score_triplets(triplets, ctx_);
    std::vector<double> out(triplets.size());
    const std::size_t per = (triplets.size() + workers_ - 1) / workers_;
    std::vector<std::thread> threads;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t begin = 0; begin < triplets.size(); begin += per) {
      const auto n = std::min(per, triplets.size() - begin);
      threads.emplace_back([&, begin, n] {
        try {
          auto part = model_.score_triplets(triplets.subspan(begin, n), ctx_);
          std::copy(part.begin(), part.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
  }

  Scorer as_scorer() const {
    return [this](std::span<const Triplet> t) { return (*this)(t); };
  }

  // The composed vector of OOKB entity u (BN in inference mode). Never reads
  // u's base embedding.
  numerics::Vector<Scalar> ookb_vector(EntityId u) const {
    if (!ctx_.is_ookb(u)) throw InferenceError("entity " + ctx_.describe(u) + " is not an OOKB entity");
    return model_.propagate_one(u, ctx_);
  }

 private:
  const GraphModel<Scalar>& model_;
  NeighborSampler train_;
  std::optional<NeighborSampler> aux_;
  PropagationContext ctx_;
  unsigned workers_;
};

// How the pooling baseline turns an aux triplet into a candidate vector for u.
enum class BaselineVariant {
  // v_h + v_r for (h, r, u); v_t - v_r for (u, r, t).
  ImpliedPosition,
  // v_h or v_t as is.
  RawNeighbor,
};

// Pools the TransE-derived candidate vectors of u's aux triplets. `transe`
// should be a model in mode None; only its base embeddings are read.
template <typename Scalar>
numerics::Vector<Scalar> baseline_ookb_vector(EntityId u, const OokbContext& ctx, Pooling pooling,
                                              const GraphModel<Scalar>& transe,
                                              BaselineVariant variant = BaselineVariant::ImpliedPosition) {
  if (ctx.ookb.count(u) == 0) throw InferenceError("entity #" + std::to_string(u) + " is not an OOKB entity");
  const auto& ent = transe.entity_embeddings().value;
  const auto& rel = transe.relation_embeddings().value;
  std::vector<numerics::Vector<Scalar>> candidates;
  for (const auto& t : ctx.aux.head_neighbors(u)) {  // (h, r, u)
    numerics::Vector<Scalar> v = ent.col(t.head);
    if (variant == BaselineVariant::ImpliedPosition) v += rel.col(t.relation);
    candidates.push_back(std::move(v));
  }
  for (const auto& t : ctx.aux.tail_neighbors(u)) {  // (u, r, t)
    numerics::Vector<Scalar> v = ent.col(t.tail);
    if (variant == BaselineVariant::ImpliedPosition) v -= rel.col(t.relation);
    candidates.push_back(std::move(v));
  }
  if (candidates.empty()) throw InferenceError("OOKB entity #" + std::to_string(u) + " has no auxiliary triplet");
  numerics::Vector<Scalar> out = candidates.front();
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (pooling == Pooling::Max) {
      out = out.cwiseMax(candidates[i]);
    } else {
      out += candidates[i];
    }
  }
  if (pooling == Pooling::Avg) out /= static_cast<Scalar>(candidates.size());
  return out;
}

// TransE scoring where OOKB entities use baseline_ookb_vector.
template <typename Scalar>
class BaselineScorer {
 public:
  BaselineScorer(const GraphModel<Scalar>& transe, const OokbContext& ctx, Pooling pooling,
                 BaselineVariant variant = BaselineVariant::ImpliedPosition)
      : transe_(transe), ctx_(ctx), pooling_(pooling), variant_(variant) {}

  std::vector<double> operator()(std::span<const Triplet> triplets) const {
    const auto& rel = transe_.relation_embeddings().value;
    std::vector<double> out;
    out.reserve(triplets.size());
    for (const auto& t : triplets) {
      const numerics::Vector<Scalar> diff = vector_of(t.head) + rel.col(t.relation) - vector_of(t.tail);
      out.push_back(static_cast<double>(transe_.config().norm_p == 1 ? diff.template lpNorm<1>() : diff.norm()));
    }
    return out;
  }

  Scorer as_scorer() const {
    return [this](std::span<const Triplet> t) { return (*this)(t); };
  }

 private:
  numerics::Vector<Scalar> vector_of(EntityId e) const {
    if (ctx_.ookb.count(e) != 0) {
      auto it = cache_.find(e);
      if (it == cache_.end()) it = cache_.emplace(e, baseline_ookb_vector(e, ctx_, pooling_, transe_, variant_)).first;
      return it->second;
    }
    if (e < 0 || e >= transe_.num_entities()) throw InferenceError("unknown entity #" + std::to_string(e));
    return transe_.entity_embeddings().value.col(e);
  }

  const GraphModel<Scalar>& transe_;
  const OokbContext& ctx_;
  Pooling pooling_;
  BaselineVariant variant_;
  mutable std::unordered_map<EntityId, numerics::Vector<Scalar>> cache_;
};

struct EvalRecord {
  std::string dataset;
  std::string method;
  std::string pooling;
  double accuracy = 0;
  std::size_t n_test = 0;
  std::string threshold_digest;
  double validation_accuracy = 0;

  nlohmann::json to_json() const;
};

// Tunes thresholds on `validation`, classifies `test`, reports accuracy.
EvalRecord evaluate_classification(std::span<const LabeledTriplet> validation, std::span<const LabeledTriplet> test,
                                   const Scorer& scorer, RelationId num_relations, bool per_relation = true);

// Accuracy on split.test with thresholds already tuned on split.validation.
double evaluate_ookb(const OokbSplit& split, const Scorer& scorer, const ThresholdTable& thresholds);

// Fixed-width summary of records, one row each.
std::string format_summary(std::span<const EvalRecord> records);

}  // namespace ookb

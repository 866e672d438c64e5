#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ookb/dataset_gen.hpp"
#include "ookb/eval.hpp"
#include "ookb/model_io.hpp"
#include "ookb/numerics/gradcheck.hpp"
#include "ookb/run_config.hpp"
#include "ookb/trainer.hpp"

// The operations behind each CLI subcommand, callable from tests.
namespace ookb::pipeline {

std::vector<ConfigKey> gen_ookb_schema();
std::vector<ConfigKey> train_schema();
std::vector<ConfigKey> eval_schema();
std::vector<ConfigKey> predict_schema();
std::vector<ConfigKey> gradcheck_schema();

struct GeneratedSplit {
  std::string name;
  SplitStats stats;
};

// Builds every requested (position, n) split and writes it to `out`.
std::vector<GeneratedSplit> run_gen_ookb(const RunConfig& cfg, std::ostream& log);

// A trained model together with the graph it propagates over.
struct TrainedModel {
  ModelBundle<float> bundle;
  KnowledgeGraph graph;
};

// Model bundle + graph.txt (the training triplets).
void save_trained(const std::string& dir, const GraphModel<float>& model, const Vocabularies& vocab,
                  const std::vector<Triplet>& train, nlohmann::json meta);
TrainedModel load_trained(const std::string& dir);

struct TrainResult {
  std::string model_dir;
  std::vector<EpochMetrics> metrics;
};

TrainResult run_train(const RunConfig& cfg, std::ostream& log);

std::vector<EvalRecord> run_eval(const RunConfig& cfg, std::ostream& log);

struct Prediction {
  std::string head;
  std::string relation;
  std::string tail;
  double score = 0;
  double threshold = 0;
  bool positive = false;
};

std::vector<Prediction> run_predict(const RunConfig& cfg, std::ostream& log);

struct GradcheckEntry {
  std::string name;
  numerics::GradcheckResult result;
};

// Op-level checks (affine, relu, tanh, batch norm, norms, pooling, losses)
// and full-model checks on a 5-entity fixture, all at 64-bit.
std::vector<GradcheckEntry> run_gradcheck_suite(const numerics::GradcheckOptions& options);

}  // namespace ookb::pipeline

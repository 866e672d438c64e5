#pragma once

#include <filesystem>
#include <memory>
#include <json.hpp>
#include <string>

#include "ookb/graph_model.hpp"
#include "ookb/numerics/checkpoint.hpp"
#include "ookb/triplet_io.hpp"

namespace ookb {

// A model checkpoint directory: the numerics checkpoint (tensors.bin +
// manifest.json) whose meta carries the PropagationConfig and vocabulary
// sizes, plus entities.txt / relations.txt so ids stay stable.
template <typename Scalar>
struct ModelBundle {
  std::unique_ptr<GraphModel<Scalar>> model;
  Vocabularies vocab;
  nlohmann::json meta;

  int epochs_completed() const { return meta.value("epochs_completed", 0); }
};

template <typename Scalar>
void save_model(const std::string& dir, const GraphModel<Scalar>& model, const Vocabularies& vocab,
                nlohmann::json extra = nlohmann::json::object()) {
  namespace fs = std::filesystem;
  extra["propagation"] = model.config().to_json();
  extra["num_entities"] = model.num_entities();
  extra["num_relations"] = model.num_relations();
  extra["vocabulary"] = {{"entities", "entities.txt"}, {"relations", "relations.txt"}};
  numerics::save_checkpoint(dir, model.params(), extra);
  vocab.entities.save((fs::path(dir) / "entities.txt").string());
  vocab.relations.save((fs::path(dir) / "relations.txt").string());
}

template <typename Scalar>
ModelBundle<Scalar> load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto manifest = numerics::read_checkpoint_manifest(dir);
  const auto& meta = manifest.at("meta");
  ModelBundle<Scalar> b;
  try {
    const auto cfg = PropagationConfig::from_json(meta.at("propagation"));
    b.model = std::make_unique<GraphModel<Scalar>>(cfg, meta.at("num_entities").get<EntityId>(),
                                                   meta.at("num_relations").get<RelationId>(), 0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + dir + " has incomplete metadata: " + e.what());
  }
  b.meta = numerics::load_checkpoint(dir, b.model->params());
  b.vocab.entities = Vocabulary::load((fs::path(dir) / "entities.txt").string());
  b.vocab.relations = Vocabulary::load((fs::path(dir) / "relations.txt").string());
  if (b.vocab.entities.size() != b.model->num_entities() || b.vocab.relations.size() != b.model->num_relations())
    throw DataError("checkpoint vocabulary does not match the model size in " + dir);
  return b;
}

}  // namespace ookb

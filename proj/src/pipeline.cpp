#include "ookb/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace ookb::pipeline {

namespace fs = std::filesystem;

namespace {

unsigned worker_count(const RunConfig& cfg) {
  const int w = cfg.get_int("workers");
  if (w < 0) throw ConfigError("workers must be nonnegative");
  if (w > 0) return static_cast<unsigned>(w);
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string require(const RunConfig& cfg, const std::string& key) {
  const auto& v = cfg.get(key);
  if (v.empty()) throw ConfigError("'" + key + "' is required");
  return v;
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw DataError("cannot open " + path);
}

std::string epoch_dir(const std::string& out, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%04d", epoch);
  return (fs::path(out) / "checkpoints" / buf).string();
}

// Loads a labeled file into a vocabulary that must not grow: every entity and
// relation has to be known to the model already.
std::vector<LabeledTriplet> load_known(const std::string& path, bool labeled, Vocabularies& vocab,
                                       EntityId num_entities, RelationId num_relations) {
  require_file(path);
  auto triplets = load_triplet_file(path, labeled, vocab);
  for (const auto& lt : triplets) {
    const auto& t = lt.triplet;
    for (auto e : {t.head, t.tail})
      if (e >= num_entities)
        throw InferenceError("entity '" + vocab.entities.name(e) + "' in " + path + " is unknown to the model");
    if (t.relation >= num_relations)
      throw InferenceError("relation '" + vocab.relations.name(t.relation) + "' in " + path +
                           " is unknown to the model");
  }
  return triplets;
}

PropagationConfig propagation_from(const RunConfig& cfg, bool is_split) {
  PropagationConfig p;
  const auto& dim = cfg.get("dim");
  p.dim = dim == "auto" ? (is_split ? 100 : 200) : cfg.get_int("dim");
  p.depth = cfg.get_int("depth");
  p.mode = parse_mode(cfg.get("mode"));
  p.pooling = parse_pooling(cfg.get("pooling"));
  p.transition = parse_transition(cfg.get("transition"));
  p.neighbor_cap = cfg.get_int("neighbor_cap");
  p.norm_p = cfg.get_int("norm");
  p.bn_momentum = cfg.get_double("bn_momentum");
  p.bn_epsilon = cfg.get_double("bn_epsilon");
  p.validate();
  return p;
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_int("epochs");
  t.minibatch = cfg.get_size("minibatch");
  t.tau = cfg.get_double("tau");
  t.adam.alpha1 = cfg.get_double("alpha1");
  t.adam.alpha2 = cfg.get_double("alpha2");
  t.objective = parse_objective(cfg.get("objective"));
  t.seed = cfg.get_u64("seed");
  t.checkpoint_every = cfg.get_int("checkpoint_every");
  t.filter_false_negatives = cfg.get_bool("filter_false_negatives");
  t.project_unit_ball = cfg.get_bool("project_unit_ball");
  t.early_stop_patience = cfg.get_int("early_stop_patience");
  t.validate();
  return t;
}

BaselineVariant parse_variant(const std::string& s) {
  if (s == "implied-position") return BaselineVariant::ImpliedPosition;
  if (s == "raw-neighbor") return BaselineVariant::RawNeighbor;
  throw ConfigError("unknown baseline_variant '" + s + "' (implied-position, raw-neighbor)");
}

// A split may have its own model under checkpoint/<split>/model or
// checkpoint/<split>; otherwise the checkpoint itself is used.
std::string checkpoint_for(const std::string& checkpoint, const std::string& split) {
  for (const auto& candidate : {fs::path(checkpoint) / split / "model", fs::path(checkpoint) / split})
    if (fs::is_regular_file(candidate / "manifest.json")) return candidate.string();
  return checkpoint;
}

void write_eval_outputs(const std::string& out, const std::vector<EvalRecord>& records) {
  if (out.empty()) return;
  fs::create_directories(out);
  std::string lines;
  for (const auto& r : records) lines += r.to_json().dump() + "\n";
  write_file((fs::path(out) / "report.jsonl").string(), lines);
  write_file((fs::path(out) / "summary.txt").string(), format_summary(records));
}

}  // namespace

std::vector<ConfigKey> gen_ookb_schema() {
  return {{"train", "", "training triplets (head, relation, tail)"},
          {"valid", "", "labeled validation triplets"},
          {"test", "", "labeled test triplets"},
          {"n", "1000,3000,5000", "number of leading test lines to draw OOKB candidates from"},
          {"position", "Head,Tail,Both", "where OOKB candidates are taken from"},
          {"out", "", "output directory"}};
}

std::vector<ConfigKey> train_schema() {
  return {{"train", "", "training triplets (standard setting)"},
          {"valid", "", "labeled validation triplets (standard setting, early stopping)"},
          {"test", "", "labeled test triplets (standard setting, vocabulary only)"},
          {"split_dir", "", "directory written by gen-ookb"},
          {"split", "", "split name inside split_dir, e.g. Head-1000"},
          {"out", "", "output directory"},
          {"resume", "", "checkpoint directory to resume from"},
          {"seed", "1", "master seed"},
          {"workers", "0", "threads for validation scoring (0 = all cores)"},
          {"dim", "auto", "embedding dimension (auto: 200 standard, 100 OOKB)"},
          {"depth", "1", "propagation steps"},
          {"mode", "unrolled", "none, stacked or unrolled"},
          {"pooling", "avg", "sum, avg or max"},
          {"transition", "relation-relu-bn", "identity, tanh-layer, relu-layer or relation-relu-bn"},
          {"neighbor_cap", "64", "maximum neighbors per entity per step"},
          {"norm", "1", "score norm (1 or 2)"},
          {"bn_momentum", "0.9", "batch norm running-statistics momentum"},
          {"bn_epsilon", "1e-5", "batch norm epsilon"},
          {"epochs", "300", "training epochs"},
          {"minibatch", "5000", "positive triplets per minibatch"},
          {"tau", "300", "margin"},
          {"alpha1", "0.01", "initial step size"},
          {"alpha2", "0.0001", "step size decay"},
          {"objective", "absolute", "absolute or pairwise"},
          {"checkpoint_every", "10", "epochs between checkpoints (0 = final only)"},
          {"filter_false_negatives", "false", "resample corrupted triplets found in the training graph"},
          {"project_unit_ball", "false", "rescale entity vectors into the unit ball after each step"},
          {"early_stop_patience", "0", "checkpoints without validation improvement before stopping"}};
}

std::vector<ConfigKey> eval_schema() {
  return {{"checkpoint", "", "model directory (or a directory with one model per split)"},
          {"valid", "", "labeled validation triplets (standard setting)"},
          {"test", "", "labeled test triplets (standard setting)"},
          {"split_dir", "", "directory written by gen-ookb"},
          {"splits", "", "split names to evaluate, e.g. Head-1000,Tail-1000"},
          {"baseline", "false", "score OOKB entities with the TransE pooling baseline"},
          {"baseline_variant", "implied-position", "implied-position or raw-neighbor"},
          {"baseline_pooling", "avg", "baseline pooling: sum, avg or max"},
          {"per_relation", "true", "tune one threshold per relation"},
          {"out", "", "output directory for report.jsonl, summary.txt and thresholds"},
          {"seed", "1", "seed for neighbor sampling"},
          {"workers", "0", "scoring threads (0 = all cores)"},
          {"dataset", "standard", "dataset name for the standard-setting record"}};
}

std::vector<ConfigKey> predict_schema() {
  return {{"checkpoint", "", "model directory"},
          {"triplets", "", "triplets to score (head, relation, tail)"},
          {"aux", "", "auxiliary triplets introducing OOKB entities"},
          {"ookb", "", "OOKB entity names, one per line (default: aux entities outside the training graph)"},
          {"thresholds", "", "threshold table JSON written by eval"},
          {"valid", "", "labeled validation triplets to tune thresholds when none are given"},
          {"out", "", "output file (default: standard output)"},
          {"seed", "1", "seed for neighbor sampling"},
          {"workers", "0", "scoring threads (0 = all cores)"}};
}

std::vector<ConfigKey> gradcheck_schema() {
  return {{"tolerance", "1e-4", "maximum relative error"},
          {"step", "1e-5", "central difference step"},
          {"flip_sign", "", "negate the analytic gradient of this parameter (self-test)"}};
}

std::vector<GeneratedSplit> run_gen_ookb(const RunConfig& cfg, std::ostream& log) {
  const auto out = require(cfg, "out");
  std::vector<std::size_t> ns;
  for (const auto& s : cfg.get_list("n")) {
    std::size_t v = 0;
    try {
      std::size_t used = 0;
      const long long parsed = std::stoll(s, &used);
      if (used != s.size() || parsed <= 0) throw std::invalid_argument(s);
      v = static_cast<std::size_t>(parsed);
    } catch (const std::exception&) {
      throw ConfigError("n must be a positive integer, got '" + s + "'");
    }
    ns.push_back(v);
  }
  if (ns.empty()) throw ConfigError("n is empty");
  std::vector<OokbPosition> positions;
  for (const auto& s : cfg.get_list("position")) positions.push_back(parse_position(s));
  if (positions.empty()) throw ConfigError("position is empty");

  for (const auto& key : {"train", "valid", "test"}) require_file(require(cfg, key));
  Vocabularies vocab;
  LoadSummary train_summary;
  const auto train = strip_labels(load_triplet_file(cfg.get("train"), false, vocab, &train_summary));
  const auto valid = load_triplet_file(cfg.get("valid"), true, vocab);
  const auto test = load_triplet_file(cfg.get("test"), true, vocab);
  log << "loaded train=" << train.size() << " valid=" << valid.size() << " test=" << test.size()
      << " entities=" << vocab.entities.size() << " relations=" << vocab.relations.size() << '\n';

  fs::create_directories(out);
  std::vector<GeneratedSplit> result;
  for (auto position : positions)
    for (auto n : ns) {
      const auto split = generate_ookb_split(train, valid, test, n, position);
      const auto name = split_name(position, n);
      // The construction can leave an aux triplet whose known endpoint has no
      // training triplet left; that is reported, not repaired, so counts stay
      // comparable with the published ones.
      if (auto problem = check_split_invariants(split); !problem.empty())
        log << "warning: " << name << ": " << problem << '\n';
      write_split(out, name, split, vocab);
      const auto& s = split.stats;
      log << name << " ookb_entities=" << s.ookb_entities << " training=" << s.training_triplets
          << " aux=" << s.aux_triplets << " test=" << s.test_triplets << " validation=" << s.validation_triplets
          << " discarded=" << s.discarded_triplets << '\n';
      result.push_back({name, s});
    }
  return result;
}

void save_trained(const std::string& dir, const GraphModel<float>& model, const Vocabularies& vocab,
                  const std::vector<Triplet>& train, nlohmann::json meta) {
  save_model(dir, model, vocab, std::move(meta));
  save_triplet_file((fs::path(dir) / "graph.txt").string(), as_positive(train), false, vocab);
}

TrainedModel load_trained(const std::string& dir) {
  if (!fs::is_regular_file(fs::path(dir) / "manifest.json")) throw DataError("no checkpoint at " + dir);
  TrainedModel m{load_model<float>(dir), {}};
  auto vocab = m.bundle.vocab;
  const auto graph_path = (fs::path(dir) / "graph.txt").string();
  require_file(graph_path);
  const auto triplets = strip_labels(load_triplet_file(graph_path, false, vocab));
  if (vocab.entities.size() != m.bundle.vocab.entities.size() ||
      vocab.relations.size() != m.bundle.vocab.relations.size())
    throw DataError(graph_path + " names entities or relations outside the checkpoint vocabulary");
  m.graph = KnowledgeGraph::build(triplets, m.bundle.model->num_entities());
  return m;
}

TrainResult run_train(const RunConfig& cfg, std::ostream& log) {
  const auto out = require(cfg, "out");
  const bool is_split = !cfg.empty("split_dir") || !cfg.empty("split");
  if (is_split && (cfg.empty("split_dir") || cfg.empty("split")))
    throw ConfigError("OOKB training needs both split_dir and split");
  if (is_split == !cfg.empty("train")) throw ConfigError("give either train or split_dir + split");

  auto train_cfg = train_config_from(cfg);
  auto prop = propagation_from(cfg, is_split);
  const auto seed = train_cfg.seed;

  fs::create_directories(out);
  write_file((fs::path(out) / "effective_config.txt").string(), cfg.to_text());
  log << cfg.echo({"epochs", "minibatch", "tau"}) << '\n';

  // Vocabulary: resumed runs keep the checkpoint's ids.
  std::optional<TrainedModel> resumed;
  Vocabularies vocab;
  if (!cfg.empty("resume")) {
    resumed.emplace(load_trained(cfg.get("resume")));
    vocab = resumed->bundle.vocab;
    prop = resumed->bundle.model->config();
  }

  std::vector<Triplet> train;
  std::vector<LabeledTriplet> valid;
  if (is_split) {
    auto split = read_split(cfg.get("split_dir"), cfg.get("split"), vocab);
    train = std::move(split.train);
    valid = std::move(split.validation);
  } else {
    require_file(cfg.get("train"));
    train = strip_labels(load_triplet_file(cfg.get("train"), false, vocab));
    if (!cfg.empty("valid")) {
      require_file(cfg.get("valid"));
      valid = load_triplet_file(cfg.get("valid"), true, vocab);
    }
    if (!cfg.empty("test")) {
      require_file(cfg.get("test"));
      load_triplet_file(cfg.get("test"), true, vocab);
    }
  }
  if (train.empty()) throw DataError("no training triplets");

  std::unique_ptr<GraphModel<float>> owned;
  GraphModel<float>* model = nullptr;
  if (resumed) {
    model = resumed->bundle.model.get();
    if (vocab.entities.size() != model->num_entities() || vocab.relations.size() != model->num_relations())
      throw DataError("training data names entities or relations the resumed checkpoint does not know");
  } else {
    owned = std::make_unique<GraphModel<float>>(prop, vocab.entities.size(), vocab.relations.size(),
                                                mix_seed(seed, 0x696e6974ULL));
    model = owned.get();
  }

  const auto graph = KnowledgeGraph::build(train, model->num_entities());
  log << "graph triplets=" << graph.size() << " entities=" << entities_of(graph).size()
      << " relations=" << relations_of(graph).size() << " duplicates=" << graph.duplicates_collapsed()
      << " params=" << model->params().size() << '\n';

  Trainer<float> trainer(*model, graph, train_cfg);
  if (resumed) trainer.set_next_epoch(resumed->bundle.epochs_completed());

  const auto metrics_path = (fs::path(out) / "metrics.jsonl").string();
  std::ofstream metrics_file(metrics_path, resumed ? std::ios::app : std::ios::trunc);
  if (!metrics_file) throw DataError("cannot write " + metrics_path);

  auto meta_for = [&](int completed) {
    nlohmann::json meta;
    meta["epochs_completed"] = completed;
    meta["train"] = train_cfg.to_json();
    if (is_split) meta["split"] = cfg.get("split");
    return meta;
  };

  TrainResult result;
  result.model_dir = (fs::path(out) / "model").string();
  typename Trainer<float>::Hooks hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    metrics_file << m.to_json().dump() << '\n' << std::flush;
    log << "epoch " << m.epoch << " loss=" << m.loss << " pos=" << m.mean_pos_score << " neg=" << m.mean_neg_score
        << " step=" << m.step_size << " time=" << m.wall_time << "s\n";
    result.metrics.push_back(m);
  };
  hooks.on_checkpoint = [&](int completed) {
    save_trained(epoch_dir(out, completed), *model, vocab, train, meta_for(completed));
  };
  if (train_cfg.early_stop_patience > 0 && !valid.empty()) {
    const unsigned workers = worker_count(cfg);
    hooks.validation_metric = [&, workers] {
      ModelScorer<float> scorer(*model, graph, nullptr, seed, workers);
      const auto rec = evaluate_classification(valid, valid, scorer.as_scorer(), model->num_relations());
      log << "validation accuracy=" << rec.validation_accuracy << '\n';
      return rec.validation_accuracy;
    };
  }
  trainer.train(hooks);
  save_trained(result.model_dir, *model, vocab, train, meta_for(trainer.next_epoch()));
  log << "model written to " << result.model_dir << '\n';
  return result;
}

std::vector<EvalRecord> run_eval(const RunConfig& cfg, std::ostream& log) {
  const auto checkpoint = require(cfg, "checkpoint");
  const auto out = cfg.get("out");
  const unsigned workers = worker_count(cfg);
  const auto seed = cfg.get_u64("seed");
  const bool per_relation = cfg.get_bool("per_relation");
  const bool baseline = cfg.get_bool("baseline");
  const auto splits = cfg.get_list("splits");
  if (!out.empty()) fs::create_directories(out);

  auto save_thresholds = [&](const std::string& dataset, const ThresholdTable& table) {
    if (!out.empty())
      write_file((fs::path(out) / ("thresholds-" + dataset + ".json")).string(), table.to_json().dump(2) + "\n");
  };

  std::vector<EvalRecord> records;
  if (splits.empty()) {
    if (baseline) throw ConfigError("baseline applies to OOKB splits only");
    auto trained = load_trained(checkpoint);
    auto& model = *trained.bundle.model;
    auto vocab = trained.bundle.vocab;
    const auto valid = load_known(require(cfg, "valid"), true, vocab, model.num_entities(), model.num_relations());
    const auto test = load_known(require(cfg, "test"), true, vocab, model.num_entities(), model.num_relations());
    ModelScorer<float> scorer(model, trained.graph, nullptr, seed, workers, &vocab.entities);
    const auto val_scores = scorer(strip_labels(valid));
    const auto table = tune_thresholds(valid, val_scores, model.num_relations(), per_relation);
    EvalRecord r;
    r.dataset = cfg.get("dataset");
    r.method = model.config().mode == PropagationMode::None ? "transe" : "proposed";
    r.pooling = model.config().mode == PropagationMode::None ? "-" : std::string(to_string(model.config().pooling));
    r.accuracy = accuracy(test, table, scorer(strip_labels(test)));
    r.validation_accuracy = accuracy(valid, table, val_scores);
    r.n_test = test.size();
    r.threshold_digest = table.digest();
    save_thresholds(r.dataset, table);
    records.push_back(r);
  } else {
    const auto split_dir = require(cfg, "split_dir");
    const auto variant = parse_variant(cfg.get("baseline_variant"));
    const auto baseline_pooling = parse_pooling(cfg.get("baseline_pooling"));
    for (const auto& name : splits) {
      const auto dir = checkpoint_for(checkpoint, name);
      auto trained = load_trained(dir);
      auto& model = *trained.bundle.model;
      auto vocab = trained.bundle.vocab;
      const auto split = read_split(split_dir, name, vocab);
      for (const auto& lt : split.validation)
        for (auto e : {lt.triplet.head, lt.triplet.tail})
          if (e >= model.num_entities())
            throw InferenceError("validation entity '" + vocab.entities.name(e) + "' is unknown to the model");
      const auto ctx = OokbContext::build(split.aux, split.ookb_entities);

      EvalRecord r;
      r.dataset = name;
      std::unique_ptr<ModelScorer<float>> model_scorer;
      std::unique_ptr<BaselineScorer<float>> baseline_scorer;
      Scorer scorer;
      if (baseline) {
        if (model.config().mode != PropagationMode::None)
          log << "note: baseline on a propagation model uses its base embeddings only\n";
        baseline_scorer = std::make_unique<BaselineScorer<float>>(model, ctx, baseline_pooling, variant);
        scorer = baseline_scorer->as_scorer();
        r.method = variant == BaselineVariant::ImpliedPosition ? "baseline" : "baseline-raw";
        r.pooling = std::string(to_string(baseline_pooling));
      } else {
        model_scorer = std::make_unique<ModelScorer<float>>(model, trained.graph, &ctx, seed, workers,
                                                            &vocab.entities);
        scorer = model_scorer->as_scorer();
        r.method = model.config().mode == PropagationMode::None ? "transe" : "proposed";
        r.pooling = std::string(to_string(model.config().pooling));
      }
      const auto val_scores = scorer(strip_labels(split.validation));
      const auto table = tune_thresholds(split.validation, val_scores, model.num_relations(), per_relation);
      r.accuracy = evaluate_ookb(split, scorer, table);
      r.validation_accuracy = accuracy(split.validation, table, val_scores);
      r.n_test = split.test.size();
      r.threshold_digest = table.digest();
      save_thresholds(name + (baseline ? "-baseline" : ""), table);
      log << name << " " << r.method << " accuracy=" << r.accuracy << " (validation " << r.validation_accuracy
          << ", model " << dir << ")\n";
      records.push_back(r);
    }
  }
  write_eval_outputs(out, records);
  log << format_summary(records);
  return records;
}

std::vector<Prediction> run_predict(const RunConfig& cfg, std::ostream& log) {
  auto trained = load_trained(require(cfg, "checkpoint"));
  auto& model = *trained.bundle.model;
  auto vocab = trained.bundle.vocab;
  const auto known = entities_of(trained.graph);

  const auto input_path = require(cfg, "triplets");
  require_file(input_path);
  const auto inputs = strip_labels(load_triplet_file(input_path, false, vocab));
  std::vector<Triplet> aux;
  if (!cfg.empty("aux")) {
    require_file(cfg.get("aux"));
    aux = strip_labels(load_triplet_file(cfg.get("aux"), false, vocab));
  }
  for (const auto& t : inputs)
    if (t.relation >= model.num_relations())
      throw InferenceError("relation '" + vocab.relations.name(t.relation) + "' is unknown to the model");

  std::set<EntityId> ookb;
  if (!cfg.empty("ookb")) {
    require_file(cfg.get("ookb"));
    std::istringstream in(read_file(cfg.get("ookb")));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ookb.insert(vocab.entities.intern(line));
  } else {
    for (const auto& t : aux)
      for (auto e : {t.head, t.tail})
        if (known.count(e) == 0) ookb.insert(e);
  }
  for (const auto& t : inputs)
    for (auto e : {t.head, t.tail})
      if (known.count(e) == 0 && ookb.count(e) == 0)
        throw InferenceError("entity '" + vocab.entities.name(e) +
                             "' is not in the training graph and has no auxiliary triplet");

  std::optional<OokbContext> ctx;
  if (!ookb.empty()) ctx = OokbContext::build(aux, ookb);
  ModelScorer<float> scorer(model, trained.graph, ctx ? &*ctx : nullptr, cfg.get_u64("seed"), worker_count(cfg),
                            &vocab.entities);

  ThresholdTable table;
  if (!cfg.empty("thresholds")) {
    require_file(cfg.get("thresholds"));
    try {
      table = ThresholdTable::from_json(nlohmann::json::parse(read_file(cfg.get("thresholds"))));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cannot read thresholds " + cfg.get("thresholds") + ": " + e.what());
    }
  } else if (!cfg.empty("valid")) {
    const auto valid = load_known(cfg.get("valid"), true, vocab, model.num_entities(), model.num_relations());
    table = tune_thresholds(valid, scorer.as_scorer(), model.num_relations());
  } else {
    throw ConfigError("predict needs thresholds or valid");
  }

  const auto scores = scorer(inputs);
  std::vector<Prediction> out;
  std::string text;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& t = inputs[i];
    Prediction p{vocab.entities.name(t.head), vocab.relations.name(t.relation), vocab.entities.name(t.tail),
                 scores[i], table.threshold(t.relation), false};
    p.positive = classify(p.score, p.threshold);
    char buf[64];
    std::snprintf(buf, sizeof buf, "\t%.6g\t%.6g\t%d\n", p.score, p.threshold, p.positive ? 1 : -1);
    text += p.head + "\t" + p.relation + "\t" + p.tail + buf;
    out.push_back(std::move(p));
  }
  if (cfg.empty("out")) {
    log << text;
  } else {
    write_file(cfg.get("out"), text);
  }
  return out;
}

}  // namespace ookb::pipeline

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <map>

#include "ookb/pipeline.hpp"

namespace {

using namespace ookb;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Command {
  CLI::App* app = nullptr;
  std::vector<ConfigKey> schema;
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

Command add_command(CLI::App& root, const std::string& name, const std::string& help, std::vector<ConfigKey> schema) {
  Command c;
  c.app = root.add_subcommand(name, help);
  c.schema = std::move(schema);
  return c;
}

void bind_flags(Command& c) {
  c.app->add_option("--config", c.config_file, "key = value file; command-line flags take precedence");
  for (const auto& key : c.schema) {
    std::string flag = "--" + key.name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    auto* opt = c.app->add_option(flag, c.overrides[key.name], key.help);
    if (!key.default_value.empty()) opt->description(key.help + " [default: " + key.default_value + "]");
  }
}

RunConfig resolve(const Command& c) {
  RunConfig cfg(c.schema);
  if (!c.config_file.empty()) cfg.merge_file(c.config_file);
  for (const auto& key : c.schema) {
    std::string flag = "--" + key.name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (c.app->count(flag) > 0) cfg.set(key.name, c.overrides.at(key.name));
  }
  return cfg;
}

int gradcheck(const RunConfig& cfg) {
  numerics::GradcheckOptions options;
  options.tolerance = cfg.get_double("tolerance");
  options.step = cfg.get_double("step");
  options.flip_sign_of = cfg.get("flip_sign");
  bool ok = true;
  for (const auto& entry : pipeline::run_gradcheck_suite(options)) {
    const auto& r = entry.result;
    std::printf("%-4s %-52s max_rel_err=%.3e checked=%zu", r.passed ? "ok" : "FAIL", entry.name.c_str(),
                r.max_relative_error, r.checked);
    if (!r.passed) std::printf(" worst=%s[%ld]", r.worst_parameter.c_str(), static_cast<long>(r.worst_index));
    std::printf("\n");
    if (!r.passed)
      for (const auto& [name, err] : r.per_parameter)
        if (err > options.tolerance) std::printf("       %s rel_err=%.3e\n", name.c_str(), err);
    ok = ok && r.passed;
  }
  std::printf("gradcheck %s (tolerance %.1e)\n", ok ? "passed" : "FAILED", options.tolerance);
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge base completion with out-of-knowledge-base entities"};
  app.require_subcommand(1);
  std::vector<Command> commands;
  commands.push_back(add_command(app, "gen-ookb", "build OOKB datasets from a standard split", pipeline::gen_ookb_schema()));
  commands.push_back(add_command(app, "train", "train a model", pipeline::train_schema()));
  commands.push_back(add_command(app, "eval", "triplet classification accuracy", pipeline::eval_schema()));
  commands.push_back(add_command(app, "predict", "score and classify triplets", pipeline::predict_schema()));
  commands.push_back(add_command(app, "gradcheck", "check gradients against finite differences",
                                 pipeline::gradcheck_schema()));
  for (auto& c : commands) bind_flags(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      const auto cfg = resolve(c);
      const auto name = c.app->get_name();
      if (name == "gen-ookb") pipeline::run_gen_ookb(cfg, std::cout);
      if (name == "train") pipeline::run_train(cfg, std::cout);
      if (name == "eval") pipeline::run_eval(cfg, std::cout);
      if (name == "predict") pipeline::run_predict(cfg, std::cout);
      if (name == "gradcheck") return gradcheck(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

#include "slimkit/runner.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "slimkit/checkpoint.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/rng.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

namespace {

Model build_and_train_base(const ExperimentConfig& cfg, const DataBundle& data,
                           std::ostream& diag) {
  Model model = make_model(cfg.dataset.dims, cfg.hidden, cfg.dataset.classes,
                           derive_seed(cfg.seed, "model"));
  if (cfg.train.epochs > 0) {
    TrainOptions opts;
    opts.epochs = cfg.train.epochs;
    opts.lr = cfg.train.lr;
    opts.batch_size = cfg.train.batch_size;
    model = train_sgd(std::move(model), data.train, opts);
    diag << "base model trained: val_accuracy=" << accuracy(model, data.validation) << "\n";
  }
  return model;
}

double resolve_budget(const ExperimentConfig& cfg, const Model& model,
                      const DataBundle& data) {
  if (!cfg.budget_fraction) return cfg.engine.budget;
  const MeterEvaluator meters(cfg.engine.cost_meter, cfg.engine.quality_meter,
                              cfg.engine.aggregate, &data.validation);
  return *cfg.budget_fraction * meters.measure(model).cost;
}

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += "\"";
  return quoted;
}

std::string number_field(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream& diag) {
  const DataBundle data = generate_dataset(cfg.dataset, cfg.seed);
  const Model model = build_and_train_base(cfg, data, diag);
  const std::vector<Instantiation> insts = build_instantiations(cfg, model, data);
  const Policy policy = build_policy(cfg);

  EngineConfig engine_cfg = cfg.engine;
  engine_cfg.budget = resolve_budget(cfg, model, data);
  diag << "budget: " << engine_cfg.budget << " (" << engine_cfg.cost_meter;
  if (engine_cfg.aggregate) diag << ", aggregated";
  diag << ")\n";

  std::ofstream log_file;
  std::unique_ptr<RunLogWriter> writer;
  if (cfg.output.run_log) {
    log_file.open(*cfg.output.run_log);
    if (!log_file) throw ConfigError("cannot open run log for writing: " + *cfg.output.run_log);
    writer = std::make_unique<RunLogWriter>(log_file);
    writer->header(cfg.raw, cfg.seed);
  }

  ExperimentOutcome outcome;
  outcome.resolved_budget = engine_cfg.budget;
  outcome.result =
      composed_run(model, engine_cfg, insts, policy, data.train, data.validation, writer.get());
  outcome.exit_code =
      outcome.result.outcome == Outcome::kSuccess ? kExitSuccess : kExitBudgetFailure;

  diag << "engine: " << (outcome.result.outcome == Outcome::kSuccess ? "success" : "failure")
       << " after " << outcome.result.log.size() << " accepted step(s), cost "
       << outcome.result.initial.cost << " -> " << outcome.result.final.cost
       << ", quality " << outcome.result.initial.quality << " -> "
       << outcome.result.final.quality << "\n";

  if (cfg.output.checkpoint) {
    save_model(outcome.result.model, *cfg.output.checkpoint);
    diag << "checkpoint written: " << *cfg.output.checkpoint << "\n";
  }
  if (cfg.output.report) {
    if (!cfg.output.run_log) {
      throw ConfigError("report output needs a run_log path");
    }
    std::ifstream log_in(*cfg.output.run_log);
    std::ofstream report_out(*cfg.output.report);
    if (!report_out) throw ConfigError("cannot open report for writing: " + *cfg.output.report);
    write_report_csv(log_in, report_out);
    diag << "report written: " << *cfg.output.report << "\n";
  }
  return outcome;
}

void validate_experiment(const ExperimentConfig& cfg) {
  const DataBundle data = generate_dataset(cfg.dataset, cfg.seed);
  const Model model = make_model(cfg.dataset.dims, cfg.hidden, cfg.dataset.classes,
                                 derive_seed(cfg.seed, "model"));
  const std::vector<Instantiation> insts = build_instantiations(cfg, model, data);

  // Same combination + policy checks the engine itself would run.
  std::vector<Instantiation> merged_check = insts;
  Instantiation merged;
  merged.name = "combined";
  for (const Instantiation& inst : merged_check) {
    inst.validate();
    for (const Knob& k : inst.knobs) merged.knobs.push_back(k);
    for (const Rule& r : inst.rules) merged.rules.push_back(r);
  }
  merged.validate();
  const Policy policy = build_policy(cfg);
  PolicyState(policy).validate_against(merged);
  if (cfg.engine.max_iterations < 1) throw ConfigError("engine: max_iterations must be >= 1");
  if (!cfg.budget_fraction && cfg.engine.budget < 0.0) {
    throw ConfigError("engine: negative budget");
  }
  if (cfg.engine.aggregate) {
    MeterEvaluator(cfg.engine.cost_meter, cfg.engine.quality_meter, cfg.engine.aggregate,
                   &data.validation);
  } else {
    if (!is_cost_meter(cfg.engine.cost_meter)) {
      throw ConfigError("unknown cost meter '" + cfg.engine.cost_meter + "'");
    }
    if (!is_quality_meter(cfg.engine.quality_meter)) {
      throw ConfigError("unknown quality meter '" + cfg.engine.quality_meter + "'");
    }
  }
}

void write_report_csv(std::istream& run_log, std::ostream& csv) {
  csv << "iteration,cost,quality,knob,value\r\n";
  std::string line;
  while (std::getline(run_log, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("run log parse error: " + std::string(e.what()));
    }
    if (j.value("type", "") == "header") continue;
    if (j.value("type", "") == "initial") {
      const nlohmann::json& r = j.at("reading");
      csv << "0," << number_field(r.at("cost").get<double>()) << ","
          << number_field(r.at("quality").get<double>()) << ",,\r\n";
      continue;
    }
    const nlohmann::json& post = j.at("post");
    csv << j.at("step").get<int>() << "," << number_field(post.at("cost").get<double>())
        << "," << number_field(post.at("quality").get<double>()) << ","
        << csv_field(j.at("knob").get<std::string>()) << ","
        << csv_field(j.at("value").dump()) << "\r\n";
  }
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"model-efficiency toolkit: budgeted knob/rule optimization on dense nets"};
  app.require_subcommand(1);

  std::string config_path, runlog_path, out_path;

  CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment config");
  run_cmd->add_option("config", config_path, "experiment config (JSON)")->required();

  CLI::App* report_cmd = app.add_subcommand("report", "emit a cost/quality CSV from a run log");
  report_cmd->add_option("runlog", runlog_path, "run log (JSON lines)")->required();
  report_cmd->add_option("-o,--out", out_path, "output CSV path (default: stdout)");

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a config without running");
  validate_cmd->add_option("config", config_path, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) {
      const ExperimentOutcome outcome = run_experiment(load_config(config_path), std::cout);
      return outcome.exit_code;
    }
    if (report_cmd->parsed()) {
      std::ifstream in(runlog_path);
      if (!in) throw ConfigError("cannot open run log: " + runlog_path);
      if (out_path.empty()) {
        write_report_csv(in, std::cout);
      } else {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot open output: " + out_path);
        write_report_csv(in, out);
      }
      return kExitSuccess;
    }
    validate_experiment(load_config(config_path));
    std::cout << "config ok\n";
    return kExitSuccess;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace slimkit

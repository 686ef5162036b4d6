#include "slimkit/config.hpp"

#include <fstream>
#include <set>

#include "slimkit/errors.hpp"

namespace slimkit {

namespace {

DatasetKind dataset_kind(const std::string& name) {
  if (name == "gaussian_blobs") return DatasetKind::kGaussianBlobs;
  if (name == "concentric_rings") return DatasetKind::kConcentricRings;
  if (name == "teacher_labeled") return DatasetKind::kTeacherLabeled;
  throw ConfigError("unknown dataset kind '" + name + "'");
}

PruneCriterion parse_criterion(const nlohmann::json& j) {
  PruneCriterion c;
  const std::string kind = j.value("criterion", "magnitude");
  if (kind == "magnitude") {
    c.kind = PruneKind::kMagnitude;
  } else if (kind == "gradient_magnitude") {
    c.kind = PruneKind::kGradientMagnitude;
  } else {
    throw ConfigError("unknown pruning criterion '" + kind + "'");
  }
  const std::string scope = j.value("scope", "per_layer");
  if (scope == "per_layer") {
    c.scope = PruneScope::kPerLayer;
  } else if (scope == "global") {
    c.scope = PruneScope::kGlobal;
  } else {
    throw ConfigError("unknown pruning scope '" + scope + "'");
  }
  return c;
}

CandidateGrid parse_grid(const nlohmann::json& j) {
  CandidateGrid grid;
  if (!j.is_object()) throw ConfigError("grid must be an object of knob -> value list");
  for (const auto& [knob, values] : j.items()) {
    if (!values.is_array() || values.empty()) {
      throw ConfigError("grid for '" + knob + "' must be a nonempty array");
    }
    grid.values[knob] = std::vector<KnobValue>(values.begin(), values.end());
  }
  return grid;
}

InstantiationSpec parse_instantiation(const nlohmann::json& j) {
  InstantiationSpec spec;
  spec.kind = j.at("kind").get<std::string>();
  if (j.contains("grid")) spec.grid = parse_grid(j["grid"]);
  if (spec.kind == "prune") {
    spec.prune.criterion = parse_criterion(j);
    spec.prune.include_unstructured = j.value("unstructured", true);
    spec.prune.include_structured = j.value("structured", false);
  } else if (spec.kind == "quant") {
    spec.quant_per_layer = j.value("per_layer", false);
  } else if (spec.kind == "distill") {
    spec.distill.temperature = j.value("temperature", 2.0);
    spec.distill.loss_weight = j.value("loss_weight", 0.5);
    spec.distill.epochs = j.value("epochs", 3);
    spec.distill.lr = j.value("lr", 0.05);
    spec.distill.batch_size = j.value("batch_size", 32);
    if (!j.contains("students") || !j["students"].is_array() || j["students"].empty()) {
      throw ConfigError("distill instantiation needs a nonempty 'students' array");
    }
    spec.distill.student_values =
        std::vector<KnobValue>(j["students"].begin(), j["students"].end());
  } else if (spec.kind == "arch") {
    spec.arch.include_adapters = j.value("adapters", true);
    spec.arch.adapter_seed = j.value("adapter_seed", std::uint64_t{1});
    if (j.contains("resize")) {
      spec.arch.resize_values =
          std::vector<KnobValue>(j["resize"].begin(), j["resize"].end());
    }
  } else if (spec.kind == "share") {
    // nothing beyond the grid
  } else {
    throw ConfigError("unknown instantiation kind '" + spec.kind + "'");
  }
  return spec;
}

Policy parse_policy(const nlohmann::json& j) {
  Policy policy;
  policy.seed = j.value("seed", std::uint64_t{0});
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "greedy") {
    policy.kind = GreedyPolicy{};
  } else if (kind == "scheduled") {
    ScheduledPolicy sched;
    if (!j.contains("steps") || !j["steps"].is_array() || j["steps"].empty()) {
      throw ConfigError("scheduled policy needs a nonempty 'steps' array");
    }
    for (const nlohmann::json& step : j["steps"]) {
      if (!step.is_array() || step.size() != 2 || !step[0].is_string()) {
        throw ConfigError("schedule step must be [knob_id, value]");
      }
      sched.steps.emplace_back(step[0].get<std::string>(), step[1]);
    }
    policy.kind = std::move(sched);
  } else if (kind == "dual") {
    DualControllerPolicy dual;
    dual.lambda0 = j.value("lambda0", 0.0);
    dual.lambda_step = j.value("lambda_step", 0.5);
    policy.kind = std::move(dual);
  } else {
    throw ConfigError("unknown policy kind '" + kind + "'");
  }
  return policy;
}

AggregateSpec parse_aggregate(const nlohmann::json& j) {
  AggregateSpec spec;
  if (!j.contains("cost") || !j.contains("quality")) {
    throw ConfigError("aggregate needs 'cost' and 'quality' weight maps");
  }
  for (const auto& [id, w] : j["cost"].items()) spec.cost_weights[id] = w.get<double>();
  for (const auto& [id, w] : j["quality"].items()) spec.quality_weights[id] = w.get<double>();
  return spec;
}

}  // namespace

namespace {

ExperimentConfig parse_config_impl(const nlohmann::json& j);

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    return parse_config_impl(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

namespace {

ExperimentConfig parse_config_impl(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.seed = j.value("seed", std::uint64_t{0});

  const nlohmann::json& jd = j.at("dataset");
  cfg.dataset.kind = dataset_kind(jd.value("kind", "gaussian_blobs"));
  cfg.dataset.n = jd.value("n", std::size_t{200});
  cfg.dataset.dims = jd.value("dims", std::size_t{4});
  cfg.dataset.classes = jd.value("classes", std::size_t{2});
  cfg.dataset.noise = jd.value("noise", 0.5);
  if (cfg.dataset.n < 2 * cfg.dataset.classes) {
    throw ConfigError("dataset: n must be >= 2 * classes");
  }

  const nlohmann::json& jm = j.at("model");
  cfg.hidden = jm.at("hidden").get<std::vector<std::size_t>>();

  if (j.contains("train")) {
    cfg.train.epochs = j["train"].value("epochs", 0);
    cfg.train.lr = j["train"].value("lr", 0.05);
    cfg.train.batch_size = j["train"].value("batch_size", 32);
  }

  if (!j.contains("instantiations") || !j["instantiations"].is_array() ||
      j["instantiations"].empty()) {
    throw ConfigError("config needs a nonempty 'instantiations' array");
  }
  for (const nlohmann::json& ji : j["instantiations"]) {
    cfg.instantiations.push_back(parse_instantiation(ji));
  }

  cfg.policy = parse_policy(j.at("policy"));

  const nlohmann::json& je = j.at("engine");
  if (je.contains("budget")) {
    cfg.engine.budget = je["budget"].get<double>();
  } else if (je.contains("budget_fraction")) {
    cfg.budget_fraction = je["budget_fraction"].get<double>();
    if (*cfg.budget_fraction < 0.0) throw ConfigError("budget_fraction must be >= 0");
  } else {
    throw ConfigError("engine needs 'budget' or 'budget_fraction'");
  }
  cfg.engine.max_iterations = je.value("max_iterations", 10);
  cfg.engine.cost_meter = je.value("cost_meter", std::string(kMeterParamCount));
  cfg.engine.quality_meter = je.value("quality_meter", std::string(kMeterValAccuracy));
  if (je.contains("finetune")) {
    FinetuneSpec ft;
    ft.epochs = je["finetune"].value("epochs", 0);
    ft.lr = je["finetune"].value("lr", 0.05);
    ft.batch_size = je["finetune"].value("batch_size", 32);
    cfg.engine.finetune = ft;
  }
  if (je.contains("aggregate")) cfg.engine.aggregate = parse_aggregate(je["aggregate"]);

  if (j.contains("output")) {
    const nlohmann::json& jo = j["output"];
    if (jo.contains("run_log")) cfg.output.run_log = jo["run_log"].get<std::string>();
    if (jo.contains("checkpoint")) cfg.output.checkpoint = jo["checkpoint"].get<std::string>();
    if (jo.contains("report")) cfg.output.report = jo["report"].get<std::string>();
  }
  return cfg;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

std::vector<Instantiation> build_instantiations(const ExperimentConfig& cfg,
                                                const Model& model, const DataBundle& data) {
  std::vector<Instantiation> out;
  for (const InstantiationSpec& spec : cfg.instantiations) {
    if (spec.kind == "prune") {
      out.push_back(make_prune_instantiation(spec.prune, &data.train));
    } else if (spec.kind == "quant") {
      out.push_back(make_quant_instantiation(spec.quant_per_layer, &model));
    } else if (spec.kind == "distill") {
      out.push_back(make_distill_instantiation(spec.distill, data.train));
    } else if (spec.kind == "arch") {
      out.push_back(make_arch_instantiation(model, spec.arch));
    } else if (spec.kind == "share") {
      out.push_back(make_share_instantiation(model));
    }
  }
  return out;
}

Policy build_policy(const ExperimentConfig& cfg) {
  Policy policy = cfg.policy;
  CandidateGrid grid;
  std::set<std::string> seen;
  for (const InstantiationSpec& spec : cfg.instantiations) {
    for (const auto& [knob, values] : spec.grid.values) {
      if (!seen.insert(knob).second) {
        throw ConfigError("knob '" + knob + "' appears in multiple grids");
      }
      grid.values[knob] = values;
    }
    // Distill grids are implied by the student list when not given explicitly.
    if (spec.kind == "distill" && spec.grid.values.count("distill.student") == 0) {
      grid.values["distill.student"] = spec.distill.student_values;
    }
  }
  if (auto* greedy = std::get_if<GreedyPolicy>(&policy.kind)) {
    greedy->grid = std::move(grid);
  } else if (auto* dual = std::get_if<DualControllerPolicy>(&policy.kind)) {
    dual->grid = std::move(grid);
  }
  return policy;
}

}  // namespace slimkit

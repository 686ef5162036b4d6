#include "slimkit/engine.hpp"

#include <chrono>
#include <map>

#include "slimkit/errors.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

nlohmann::json reading_to_json(const MeterReading& r) {
  return {{"cost", r.cost},
          {"quality", r.quality},
          {"cost_meter", r.cost_meter_id},
          {"quality_meter", r.quality_meter_id}};
}

nlohmann::json record_to_json(const TransformationRecord& r) {
  return {{"step", r.step},
          {"instantiation", r.instantiation},
          {"knob", r.knob_id},
          {"value", r.value},
          {"rule", r.rule_id},
          {"pre", reading_to_json(r.pre)},
          {"post", reading_to_json(r.post)},
          {"timing",
           {{"rule_seconds", r.rule_seconds},
            {"finetune_seconds", r.finetune_seconds},
            {"overhead_seconds", r.overhead_seconds}}}};
}

void RunLogWriter::header(const nlohmann::json& config_echo, std::uint64_t seed) {
  nlohmann::json h = {{"type", "header"},
                      {"format_version", 1},
                      {"seed", seed},
                      {"config", config_echo}};
  out_ << h.dump() << "\n";
  out_.flush();
}

void RunLogWriter::initial(const MeterReading& r) {
  nlohmann::json line = {{"type", "initial"}, {"reading", reading_to_json(r)}};
  out_ << line.dump() << "\n";
  out_.flush();
}

void RunLogWriter::record(const TransformationRecord& r) {
  out_ << record_to_json(r).dump() << "\n";
  out_.flush();
}

Model fine_tune(Model model, const Dataset& train, int epochs, double lr, int batch_size) {
  if (epochs == 0) return model;
  TrainOptions opts;
  opts.epochs = epochs;
  opts.lr = lr;
  opts.batch_size = batch_size;
  return train_sgd(std::move(model), train, opts);
}

namespace {

struct CombinedSpace {
  Instantiation merged;
  std::map<std::string, std::string> knob_source;  // knob id -> instantiation name
};

CombinedSpace combine(const std::vector<Instantiation>& insts) {
  if (insts.empty()) throw ConfigError("engine: no instantiation given");
  CombinedSpace space;
  space.merged.name = insts.size() == 1 ? insts.front().name : "combined";
  for (const Instantiation& inst : insts) {
    inst.validate();
    for (const Knob& knob : inst.knobs) {
      if (space.knob_source.count(knob.id) != 0) {
        throw ConfigError("knob id '" + knob.id + "' collides across instantiations");
      }
      space.knob_source[knob.id] = inst.name;
      space.merged.knobs.push_back(knob);
    }
    for (const Rule& rule : inst.rules) space.merged.rules.push_back(rule);
    for (const std::string& id : inst.cost_meters) space.merged.cost_meters.push_back(id);
    for (const std::string& id : inst.quality_meters) {
      space.merged.quality_meters.push_back(id);
    }
  }
  space.merged.validate();
  return space;
}

RunResult run_loop(const Model& m0, const EngineConfig& cfg, const CombinedSpace& space,
                   const Policy& policy, const Dataset& train, const Dataset& val,
                   RunLogWriter* writer) {
  if (cfg.budget < 0.0) throw ConfigError("engine: negative budget");
  if (cfg.max_iterations < 1) throw ConfigError("engine: max_iterations must be >= 1");
  if (val.split != Split::kValidation) {
    throw ConfigError("engine: quality data must be the Validation split");
  }
  if (cfg.finetune && cfg.finetune->epochs > 0 && train.split != Split::kTrain) {
    throw ConfigError("engine: fine-tuning data must be the Train split");
  }

  const MeterEvaluator meters(cfg.cost_meter, cfg.quality_meter, cfg.aggregate, &val);
  PolicyState policy_state(policy);
  policy_state.validate_against(space.merged);

  RunResult result;
  result.model = m0;
  result.initial = meters.measure(m0);
  result.final = result.initial;
  if (writer != nullptr) writer->initial(result.initial);

  MeterReading reading = result.initial;
  int accepted = 0;
  result.stop_reason = StopReason::kBudgetMet;

  while (reading.cost > cfg.budget) {
    if (accepted >= cfg.max_iterations) {
      result.stop_reason = StopReason::kMaxIterations;
      break;
    }
    const auto iter_start = Clock::now();
    const std::optional<Selection> sel =
        policy_state.next(result.model, reading, space.merged, meters, cfg.budget);
    if (!sel) {
      result.stop_reason = StopReason::kPolicyExhausted;
      break;
    }
    const Knob* knob = space.merged.find_knob(sel->knob_id);
    if (knob == nullptr) {
      throw ConfigError("policy selected unknown knob '" + sel->knob_id + "'");
    }
    if (!validate_value(*knob, sel->value)) {
      throw ConfigError("policy selected value " + sel->value.dump() +
                        " outside domain of '" + sel->knob_id + "'");
    }
    const Rule& rule = get_rule(sel->knob_id, space.merged.rules);
    const double overhead = seconds_since(iter_start);

    const auto rule_start = Clock::now();
    Model candidate = apply_rule(rule, result.model, *knob, sel->value);
    const double rule_seconds = seconds_since(rule_start);

    MeterReading post = meters.measure(candidate);
    if (post.cost >= reading.cost) {
      // No progress: reject the transformation and stop.
      result.stop_reason = StopReason::kNonReducing;
      result.rejected_cost = post.cost;
      break;
    }
    result.model = std::move(candidate);

    double finetune_seconds = 0.0;
    if (cfg.finetune && cfg.finetune->epochs > 0) {
      const auto ft_start = Clock::now();
      result.model = fine_tune(std::move(result.model), train, cfg.finetune->epochs,
                               cfg.finetune->lr, cfg.finetune->batch_size);
      finetune_seconds = seconds_since(ft_start);
      const MeterReading tuned = meters.measure(result.model);
      if (tuned.cost != post.cost) {
        throw RuleError("fine-tuning changed the cost meter from " +
                        std::to_string(post.cost) + " to " + std::to_string(tuned.cost));
      }
      post = tuned;
    }

    ++accepted;
    TransformationRecord record;
    record.step = accepted;
    record.instantiation = space.knob_source.at(sel->knob_id);
    record.knob_id = sel->knob_id;
    record.value = sel->value;
    record.rule_id = rule.id;
    record.pre = reading;
    record.post = post;
    record.rule_seconds = rule_seconds;
    record.finetune_seconds = finetune_seconds;
    record.overhead_seconds = overhead;
    if (writer != nullptr) writer->record(record);
    result.log.push_back(std::move(record));
    reading = post;
  }

  result.final = reading;
  result.outcome = reading.cost <= cfg.budget ? Outcome::kSuccess : Outcome::kFailure;
  return result;
}

}  // namespace

RunResult budgeted_run(const Model& m0, const EngineConfig& cfg, const Instantiation& inst,
                       const Policy& policy, const Dataset& train, const Dataset& val,
                       RunLogWriter* writer) {
  return composed_run(m0, cfg, std::vector<Instantiation>{inst}, policy, train, val, writer);
}

RunResult composed_run(const Model& m0, const EngineConfig& cfg,
                       const std::vector<Instantiation>& insts, const Policy& policy,
                       const Dataset& train, const Dataset& val, RunLogWriter* writer) {
  return run_loop(m0, cfg, combine(insts), policy, train, val, writer);
}

}  // namespace slimkit

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slimkit/policy.hpp"
#include "slimkit/rules.hpp"

namespace slimkit {

struct FinetuneSpec {
  int epochs = 0;
  double lr = 0.05;
  int batch_size = 32;
};

struct EngineConfig {
  double budget = 0.0;                     // B
  int max_iterations = 1;                  // N, counts accepted iterations
  std::optional<FinetuneSpec> finetune;    // per accepted step, optional
  std::string cost_meter = kMeterParamCount;
  std::string quality_meter = kMeterValAccuracy;
  std::optional<AggregateSpec> aggregate;  // composed pipelines
};

enum class Outcome { kSuccess, kFailure };

enum class StopReason {
  kBudgetMet,        // cost <= budget
  kMaxIterations,    // accepted-iteration cap reached while still over budget
  kNonReducing,      // a proposed transformation failed to reduce cost
  kPolicyExhausted,  // the policy had no candidate left to offer
};

struct RunResult {
  Outcome outcome = Outcome::kFailure;
  Model model;  // final model regardless of outcome
  std::vector<TransformationRecord> log;
  MeterReading initial;
  MeterReading final;
  StopReason stop_reason = StopReason::kBudgetMet;
  // Cost of the last attempted, unaccepted transformation (kNonReducing only).
  std::optional<double> rejected_cost;
};

nlohmann::json reading_to_json(const MeterReading& r);
nlohmann::json record_to_json(const TransformationRecord& r);

// JSON-lines sink, one record per line after a header line, flushed per line
// so interrupted runs stay inspectable. Timing lives under a separate key so
// reproducibility checks can mask it.
class RunLogWriter {
 public:
  explicit RunLogWriter(std::ostream& out) : out_(out) {}

  void header(const nlohmann::json& config_echo, std::uint64_t seed);
  void initial(const MeterReading& r);  // written by the engine before step 1
  void record(const TransformationRecord& r);

 private:
  std::ostream& out_;
};

// Mini-batch SGD honoring masks, quantization metadata and frozen bases; the
// model's structure (and therefore every cost meter) is preserved. epochs == 0
// returns the model unchanged.
Model fine_tune(Model model, const Dataset& train, int epochs, double lr,
                int batch_size = 32);

// The budgeted reduction loop: while cost > budget and fewer than
// max_iterations steps were accepted, ask the policy for (knob, value), apply
// the rule, and accept only on strict cost decrease (breaking otherwise);
// accepted steps are optionally fine-tuned. Failure iff the final cost still
// exceeds the budget. A policy that picks an unknown knob or an out-of-domain
// value is a ConfigError, never a Failure.
RunResult budgeted_run(const Model& m0, const EngineConfig& cfg, const Instantiation& inst,
                       const Policy& policy, const Dataset& train, const Dataset& val,
                       RunLogWriter* writer = nullptr);

// Same loop over the union of several instantiations (knob ids must be unique
// across them); each record notes which instantiation its knob came from.
RunResult composed_run(const Model& m0, const EngineConfig& cfg,
                       const std::vector<Instantiation>& insts, const Policy& policy,
                       const Dataset& train, const Dataset& val,
                       RunLogWriter* writer = nullptr);

}  // namespace slimkit

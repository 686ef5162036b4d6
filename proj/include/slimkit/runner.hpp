#pragma once

#include <iosfwd>
#include <string>

#include "slimkit/config.hpp"

namespace slimkit {

// CLI exit codes.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitBudgetFailure = 2;

struct ExperimentOutcome {
  int exit_code = kExitSuccess;
  RunResult result;
  double resolved_budget = 0.0;
};

// Full pipeline: generate data, build and train the base model, package the
// configured instantiations, run the engine, write run log / checkpoint /
// report. Throws ConfigError for bad wiring; a missed budget is reported via
// exit_code, not an exception.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream& diag);

// Builds everything a run would need without executing it (dataset, model
// shape, instantiations, policy wiring). Throws ConfigError if anything is
// inconsistent.
void validate_experiment(const ExperimentConfig& cfg);

// run-log JSONL -> "iteration,cost,quality,knob,value" CSV (RFC 4180 quoting);
// one row for the initial reading plus one per step.
void write_report_csv(std::istream& run_log, std::ostream& csv);

// `run <config>` / `report <runlog>` / `validate <config>`; returns the exit
// code (0 success, 1 configuration error, 2 budget failure).
int cli_main(int argc, const char* const* argv);

}  // namespace slimkit

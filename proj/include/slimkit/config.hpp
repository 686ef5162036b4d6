#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slimkit/data.hpp"
#include "slimkit/engine.hpp"
#include "slimkit/instantiations.hpp"

namespace slimkit {

// One instantiation entry from the experiment config: which method family to
// package plus its knob grid for candidate-driven policies.
struct InstantiationSpec {
  std::string kind;  // prune | quant | distill | arch | share
  CandidateGrid grid;

  PruneMethodOptions prune;
  DistillMethodOptions distill;
  ArchMethodOptions arch;
  bool quant_per_layer = false;
};

struct TrainSpec {
  int epochs = 0;
  double lr = 0.05;
  int batch_size = 32;
};

struct OutputSpec {
  std::optional<std::string> run_log;
  std::optional<std::string> checkpoint;
  std::optional<std::string> report;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  std::vector<std::size_t> hidden;  // model hidden layer sizes
  TrainSpec train;                  // initial task training before the engine
  std::vector<InstantiationSpec> instantiations;
  Policy policy;
  EngineConfig engine;
  // Budget as a fraction of the initial cost; resolved after initial training.
  std::optional<double> budget_fraction;
  OutputSpec output;
  nlohmann::json raw;  // config echo for the run-log header
};

ExperimentConfig parse_config(const nlohmann::json& j);  // ConfigError on bad input
ExperimentConfig load_config(const std::string& path);

// Materializes the configured method families against a concrete model shape.
std::vector<Instantiation> build_instantiations(const ExperimentConfig& cfg,
                                                const Model& model, const DataBundle& data);

// The union of the per-instantiation grids, installed into greedy/dual
// policies; scheduled policies ignore it.
Policy build_policy(const ExperimentConfig& cfg);

}  // namespace slimkit

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slimkit/model.hpp"

namespace slimkit {

// Stable meter ids recorded in run logs.
inline constexpr const char* kMeterParamCount = "param_count";
inline constexpr const char* kMeterFlops = "flops";
inline constexpr const char* kMeterMemoryBytes = "memory_bytes";
inline constexpr const char* kMeterValAccuracy = "val_accuracy";
inline constexpr const char* kMeterNegValLoss = "neg_val_loss";

struct MeterReading {
  double cost = 0.0;
  double quality = 0.0;
  std::string cost_meter_id;
  std::string quality_meter_id;
};

// Weighted sums of individual meters for composed pipelines. At least one
// nonzero weight per map.
struct AggregateSpec {
  std::map<std::string, double> cost_weights;
  std::map<std::string, double> quality_weights;
};

// Alive (mask == 1) weights + biases + low-rank factors + adapters. A
// factorized layer counts u and v instead of its dense matrix.
std::size_t param_count(const Model& model);

// 2 * multiply-accumulates per example over dense, low-rank and adapter paths.
// Unstructured masks do not reduce this (dense kernels do not skip zeros);
// structurally removed units do, because the matrices physically shrink.
std::size_t flops(const Model& model);

// Storage footprint: weight-like parameters at (quant_bits or 64)/8 bytes,
// biases always 8 bytes. A shared layer stores its codebook at 64-bit plus
// ceil(log2 clusters) index bits per alive weight.
double memory_bytes(const Model& model);

// Fraction of argmax-correct predictions, ties to the lowest class index.
// Quality is only ever measured on a Validation split; anything else is a
// DomainError.
double accuracy(const Model& model, const Dataset& data);

double eval_cost_meter(const std::string& id, const Model& model);
double eval_quality_meter(const std::string& id, const Model& model, const Dataset& val);

bool is_cost_meter(const std::string& id);
bool is_quality_meter(const std::string& id);

// Weighted combination of already-taken readings; every weighted meter id must
// be present among the readings (ConfigError otherwise). A single weight of 1
// returns that reading's value and identity unchanged.
MeterReading aggregate(const std::vector<MeterReading>& readings, const AggregateSpec& spec);

// Bundles the engine's configured (or aggregated) meters into one measurement.
class MeterEvaluator {
 public:
  MeterEvaluator(std::string cost_meter, std::string quality_meter,
                 std::optional<AggregateSpec> aggregate, const Dataset* val);

  MeterReading measure(const Model& model) const;

 private:
  std::string cost_meter_;
  std::string quality_meter_;
  std::optional<AggregateSpec> aggregate_;
  const Dataset* val_;
};

}  // namespace slimkit

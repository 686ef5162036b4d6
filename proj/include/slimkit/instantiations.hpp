#pragma once

#include <cstdint>
#include <vector>

#include "slimkit/pruning.hpp"
#include "slimkit/rules.hpp"

namespace slimkit {

// Builders that package each method family as (knobs, rules, meters) for the
// engine. Rules capture references to the given datasets; the instantiation
// must not outlive them.

struct PruneMethodOptions {
  PruneCriterion criterion;
  bool include_unstructured = true;
  bool include_structured = false;
};

// Knobs "prune.unstructured" / "prune.structured", both over [0,1].
Instantiation make_prune_instantiation(const PruneMethodOptions& opts,
                                       const Dataset* calib = nullptr);

// Knob "quant.bits" over {1,2,4,8,16,32}; the rule snaps every layer. With
// per_layer set, knobs "quant.bits.L<i>" snap one layer each instead (shape
// taken from the given model).
Instantiation make_quant_instantiation(bool per_layer = false, const Model* shape = nullptr);

struct DistillMethodOptions {
  double temperature = 2.0;
  double loss_weight = 0.5;
  int epochs = 3;
  double lr = 0.05;
  int batch_size = 32;
  // Knob values, each {"layers": [...], "seed": n}; the seed travels in the
  // value so the rule stays deterministic.
  std::vector<KnobValue> student_values;
};

// Knob "distill.student"; applying it trains a student of the given spec
// against the current model as teacher and returns the student.
Instantiation make_distill_instantiation(const DistillMethodOptions& opts,
                                         const Dataset& train);

struct ArchMethodOptions {
  std::uint64_t adapter_seed = 1;
  bool include_adapters = true;
  // Knob values for "resize.spec", each {"depth": d, "width": w, "seed": n}.
  std::vector<KnobValue> resize_values;
};

// Per-layer knobs "lowrank.rank.L<i>" and "adapter.rank.L<i>" sized from the
// given model's shape, plus "resize.spec" when resize values are provided.
Instantiation make_arch_instantiation(const Model& shape, const ArchMethodOptions& opts);

// Per-layer knobs "share.clusters.L<i>" bounded by the layer's alive weights.
Instantiation make_share_instantiation(const Model& shape);

}  // namespace slimkit

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slimkit/knobs.hpp"
#include "slimkit/meters.hpp"
#include "slimkit/model.hpp"

namespace slimkit {

// A named deterministic transformation (model, value) -> model. The same
// (model, value) input must yield an identical output model; stochastic rules
// carry their seed inside the value.
struct Rule {
  std::string id;
  std::string applicable_knob;
  std::function<Model(const Model&, const KnobValue&)> transform;
};

// One accepted engine iteration. Step indices are contiguous from 1. Timing
// fields are wall-clock seconds and excluded from reproducibility comparisons.
struct TransformationRecord {
  int step = 0;
  std::string instantiation;
  std::string knob_id;
  KnobValue value;
  std::string rule_id;
  MeterReading pre;
  MeterReading post;
  double rule_seconds = 0.0;
  double finetune_seconds = 0.0;
  double overhead_seconds = 0.0;
};

// One method family packaged for the engine: knobs, their rules, and the
// meters the method is usually driven by.
struct Instantiation {
  std::string name;
  std::vector<Knob> knobs;
  std::vector<Rule> rules;
  std::vector<std::string> cost_meters;
  std::vector<std::string> quality_meters;

  // ConfigError on duplicate knob ids, rules whose knob does not exist, or
  // more than one rule registered for a knob.
  void validate() const;

  const Knob* find_knob(const std::string& id) const;
};

// The single rule registered for a knob; zero or multiple matches are a
// ConfigError.
const Rule& get_rule(const std::string& knob_id, const std::vector<Rule>& rules);

// Validates the value against the knob's domain (DomainError on violation),
// then runs the rule on a copy; the input model is never modified. Internal
// rule failures surface as RuleError.
Model apply_rule(const Rule& rule, const Model& model, const Knob& knob,
                 const KnobValue& value);

// C(model) <= budget under the named cost meter. budget must be >= 0.
bool is_feasible(const Model& model, double budget, const std::string& cost_meter);

}  // namespace slimkit

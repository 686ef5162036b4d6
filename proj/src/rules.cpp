#include "slimkit/rules.hpp"

#include <set>

#include "slimkit/errors.hpp"

namespace slimkit {

void Instantiation::validate() const {
  std::set<std::string> knob_ids;
  for (const Knob& knob : knobs) {
    validate_domain(knob);
    if (!knob_ids.insert(knob.id).second) {
      throw ConfigError("instantiation '" + name + "': duplicate knob '" + knob.id + "'");
    }
  }
  std::set<std::string> claimed;
  for (const Rule& rule : rules) {
    if (!rule.transform) {
      throw ConfigError("rule '" + rule.id + "': missing transform");
    }
    if (knob_ids.count(rule.applicable_knob) == 0) {
      throw ConfigError("rule '" + rule.id + "': knob '" + rule.applicable_knob +
                        "' is not registered");
    }
    if (!claimed.insert(rule.applicable_knob).second) {
      throw ConfigError("instantiation '" + name + "': multiple rules claim knob '" +
                        rule.applicable_knob + "'");
    }
  }
}

const Knob* Instantiation::find_knob(const std::string& id) const {
  for (const Knob& knob : knobs) {
    if (knob.id == id) return &knob;
  }
  return nullptr;
}

const Rule& get_rule(const std::string& knob_id, const std::vector<Rule>& rules) {
  const Rule* found = nullptr;
  for (const Rule& rule : rules) {
    if (rule.applicable_knob == knob_id) {
      if (found != nullptr) {
        throw ConfigError("multiple rules registered for knob '" + knob_id + "'");
      }
      found = &rule;
    }
  }
  if (found == nullptr) {
    throw ConfigError("no rule registered for knob '" + knob_id + "'");
  }
  return *found;
}

Model apply_rule(const Rule& rule, const Model& model, const Knob& knob,
                 const KnobValue& value) {
  if (knob.id != rule.applicable_knob) {
    throw ConfigError("rule '" + rule.id + "' does not apply to knob '" + knob.id + "'");
  }
  if (!validate_value(knob, value)) {
    throw DomainError("knob '" + knob.id + "': value " + value.dump() + " outside domain");
  }
  try {
    return rule.transform(model, value);
  } catch (const DomainError&) {
    throw;  // preconditions of the underlying method
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw RuleError("rule '" + rule.id + "' failed: " + e.what());
  }
}

bool is_feasible(const Model& model, double budget, const std::string& cost_meter) {
  if (budget < 0.0) throw DomainError("is_feasible: negative budget");
  return eval_cost_meter(cost_meter, model) <= budget;
}

}  // namespace slimkit

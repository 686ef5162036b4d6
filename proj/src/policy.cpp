#include "slimkit/policy.hpp"

#include "slimkit/errors.hpp"

namespace slimkit {

namespace {

struct Candidate {
  Selection selection;
  double score = 0.0;
  double cost_drop = 0.0;
};

// Tie-break shared by greedy and dual: larger cost drop, then lexicographic
// knob id, then smaller value.
bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.cost_drop != b.cost_drop) return a.cost_drop > b.cost_drop;
  if (a.selection.knob_id != b.selection.knob_id) {
    return a.selection.knob_id < b.selection.knob_id;
  }
  return knob_value_less(a.selection.value, b.selection.value);
}

// Runs `score` over every cost-reducing candidate in the grid and keeps the
// best. Candidates whose rule fails on this model (e.g. a rank that no longer
// fits) are skipped, like any other non-reducing candidate.
template <typename ScoreFn>
std::optional<Selection> best_candidate(const Model& model, const MeterReading& current,
                                        const Instantiation& inst, const CandidateGrid& grid,
                                        const MeterEvaluator& meters, ScoreFn score) {
  std::optional<Candidate> best;
  for (const auto& [knob_id, trials] : grid.values) {
    const Knob* knob = inst.find_knob(knob_id);
    if (knob == nullptr) {
      throw ConfigError("candidate grid references unknown knob '" + knob_id + "'");
    }
    const Rule& rule = get_rule(knob_id, inst.rules);
    for (const KnobValue& value : trials) {
      MeterReading after;
      try {
        after = meters.measure(apply_rule(rule, model, *knob, value));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error&) {
        continue;  // infeasible on the current model
      }
      const double cost_drop = current.cost - after.cost;
      if (cost_drop <= 0.0) continue;
      Candidate c{Selection{knob_id, value}, score(after, cost_drop), cost_drop};
      if (!best || better(c, *best)) best = std::move(c);
    }
  }
  if (!best) return std::nullopt;
  return best->selection;
}

}  // namespace

std::optional<Selection> greedy_select(const Model& model, const MeterReading& current,
                                       const Instantiation& inst, const CandidateGrid& grid,
                                       const MeterEvaluator& meters) {
  if (grid.values.empty()) throw ConfigError("greedy_select: empty candidate grid");
  return best_candidate(model, current, inst, grid, meters,
                        [&](const MeterReading& after, double cost_drop) {
                          return (after.quality - current.quality) / cost_drop;
                        });
}

std::optional<Selection> scheduled_select(const ScheduledPolicy& schedule,
                                          std::size_t& cursor) {
  if (schedule.steps.empty()) throw ConfigError("scheduled policy: empty schedule");
  if (cursor >= schedule.steps.size()) return std::nullopt;
  const auto& [knob_id, value] = schedule.steps[cursor];
  ++cursor;
  return Selection{knob_id, value};
}

DualSelection dual_select(const Model& model, const MeterReading& current,
                          const Instantiation& inst, const CandidateGrid& grid,
                          const MeterEvaluator& meters, double lambda, double lambda_step,
                          double budget) {
  if (lambda < 0.0) throw DomainError("dual_select: lambda must be >= 0");
  if (grid.values.empty()) throw ConfigError("dual_select: empty candidate grid");
  DualSelection out;
  out.pick = best_candidate(model, current, inst, grid, meters,
                            [&](const MeterReading& after, double) {
                              return after.quality - lambda * after.cost;
                            });
  out.lambda_next = current.cost > budget ? lambda * (1.0 + lambda_step) : lambda;
  return out;
}

PolicyState::PolicyState(const Policy& policy) : policy_(policy) {
  if (const auto* dual = std::get_if<DualControllerPolicy>(&policy_.kind)) {
    if (dual->lambda0 < 0.0) throw ConfigError("dual policy: lambda0 must be >= 0");
    if (dual->lambda_step < 0.0) throw ConfigError("dual policy: lambda_step must be >= 0");
    lambda_ = dual->lambda0;
  }
}

namespace {

void validate_grid(const CandidateGrid& grid, const Instantiation& inst) {
  if (grid.values.empty()) throw ConfigError("policy: empty candidate grid");
  for (const auto& [knob_id, trials] : grid.values) {
    const Knob* knob = inst.find_knob(knob_id);
    if (knob == nullptr) throw ConfigError("policy grid: unknown knob '" + knob_id + "'");
    if (trials.empty()) throw ConfigError("policy grid: no trial values for '" + knob_id + "'");
    for (const KnobValue& value : trials) {
      if (!validate_value(*knob, value)) {
        throw ConfigError("policy grid: value " + value.dump() + " outside domain of '" +
                          knob_id + "'");
      }
    }
  }
}

}  // namespace

void PolicyState::validate_against(const Instantiation& inst) const {
  if (const auto* greedy = std::get_if<GreedyPolicy>(&policy_.kind)) {
    validate_grid(greedy->grid, inst);
  } else if (const auto* dual = std::get_if<DualControllerPolicy>(&policy_.kind)) {
    validate_grid(dual->grid, inst);
  } else {
    const auto& schedule = std::get<ScheduledPolicy>(policy_.kind);
    if (schedule.steps.empty()) throw ConfigError("scheduled policy: empty schedule");
    for (const auto& [knob_id, value] : schedule.steps) {
      const Knob* knob = inst.find_knob(knob_id);
      if (knob == nullptr) {
        throw ConfigError("schedule references unknown knob '" + knob_id + "'");
      }
      if (!validate_value(*knob, value)) {
        throw ConfigError("schedule value " + value.dump() + " outside domain of '" +
                          knob_id + "'");
      }
    }
  }
}

std::optional<Selection> PolicyState::next(const Model& model, const MeterReading& current,
                                           const Instantiation& inst,
                                           const MeterEvaluator& meters, double budget) {
  if (const auto* greedy = std::get_if<GreedyPolicy>(&policy_.kind)) {
    return greedy_select(model, current, inst, greedy->grid, meters);
  }
  if (const auto* dual = std::get_if<DualControllerPolicy>(&policy_.kind)) {
    DualSelection sel = dual_select(model, current, inst, dual->grid, meters, lambda_,
                                    dual->lambda_step, budget);
    lambda_ = sel.lambda_next;
    return sel.pick;
  }
  return scheduled_select(std::get<ScheduledPolicy>(policy_.kind), cursor_);
}

}  // namespace slimkit

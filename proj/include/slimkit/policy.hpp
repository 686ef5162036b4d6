#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "slimkit/meters.hpp"
#include "slimkit/rules.hpp"

namespace slimkit {

// Finite trial values per knob; discretizes continuous domains so greedy
// enumeration stays finite. Every trial value must pass validate_value.
struct CandidateGrid {
  std::map<std::string, std::vector<KnobValue>> values;
};

struct GreedyPolicy {
  CandidateGrid grid;
};

struct ScheduledPolicy {
  std::vector<std::pair<std::string, KnobValue>> steps;
};

struct DualControllerPolicy {
  double lambda0 = 0.0;
  double lambda_step = 0.5;  // multiplicative pressure per infeasible iteration
  CandidateGrid grid;
};

struct Policy {
  std::variant<GreedyPolicy, ScheduledPolicy, DualControllerPolicy> kind =
      GreedyPolicy{};
  std::uint64_t seed = 0;
};

struct Selection {
  std::string knob_id;
  KnobValue value;
};

// Simulates every grid candidate on a model copy (rule only, no fine-tuning)
// and returns the argmax of dQ/dC over candidates with dC > 0, where
// dC = C(M) - C(M') and dQ = Q(M') - Q(M). Scores may be negative; the least
// harmful candidate wins. Ties break on larger dC, then lexicographic knob id,
// then smaller value. Empty optional means no candidate reduces cost.
std::optional<Selection> greedy_select(const Model& model, const MeterReading& current,
                                       const Instantiation& inst, const CandidateGrid& grid,
                                       const MeterEvaluator& meters);

// Next scheduled pair, advancing the cursor; empty when exhausted.
// ConfigError on an empty schedule.
std::optional<Selection> scheduled_select(const ScheduledPolicy& schedule,
                                          std::size_t& cursor);

struct DualSelection {
  std::optional<Selection> pick;
  double lambda_next = 0.0;
};

// Among cost-reducing candidates, argmax of U(M') = Q(M') - lambda * C(M')
// (same tie-break as greedy). lambda is multiplied by (1 + lambda_step) while
// the current cost exceeds the budget, once per call.
DualSelection dual_select(const Model& model, const MeterReading& current,
                          const Instantiation& inst, const CandidateGrid& grid,
                          const MeterEvaluator& meters, double lambda, double lambda_step,
                          double budget);

// Per-run mutable policy state (schedule cursor, dual-controller lambda).
class PolicyState {
 public:
  explicit PolicyState(const Policy& policy);

  // ConfigError if a grid value fails domain validation for its knob.
  void validate_against(const Instantiation& inst) const;

  std::optional<Selection> next(const Model& model, const MeterReading& current,
                                const Instantiation& inst, const MeterEvaluator& meters,
                                double budget);

  double lambda() const { return lambda_; }

 private:
  const Policy& policy_;
  std::size_t cursor_ = 0;
  double lambda_ = 0.0;
};

}  // namespace slimkit

#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace slimkit {

// Knob values travel as JSON so simple scalars (fractions, bitwidths, ranks)
// and structured values (student specs with seeds) share one representation
// and serialize into run logs unchanged.
using KnobValue = nlohmann::json;

struct ContinuousInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct DiscreteValues {
  std::vector<KnobValue> values;
};

struct PositiveInteger {
  long long max = 1;
};

using KnobDomain = std::variant<ContinuousInterval, DiscreteValues, PositiveInteger>;

struct Knob {
  std::string id;
  KnobDomain domain;
};

// Throws ConfigError for malformed domains (lo > hi, empty discrete set,
// max < 1).
void validate_domain(const Knob& knob);

// True iff value lies in the knob's domain. Interval endpoints are inclusive;
// discrete membership compares numbers numerically and everything else by
// JSON equality.
bool validate_value(const Knob& knob, const KnobValue& value);

// Deterministic ordering used by policy tie-breaking: numeric values compare
// numerically, everything else by serialized text.
bool knob_value_less(const KnobValue& a, const KnobValue& b);

}  // namespace slimkit

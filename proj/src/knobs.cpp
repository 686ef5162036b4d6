#include "slimkit/knobs.hpp"

#include <cmath>

#include "slimkit/errors.hpp"

namespace slimkit {

void validate_domain(const Knob& knob) {
  if (knob.id.empty()) throw ConfigError("knob with empty id");
  if (const auto* iv = std::get_if<ContinuousInterval>(&knob.domain)) {
    if (!(iv->lo <= iv->hi)) {
      throw ConfigError("knob '" + knob.id + "': interval lo > hi");
    }
  } else if (const auto* ds = std::get_if<DiscreteValues>(&knob.domain)) {
    if (ds->values.empty()) {
      throw ConfigError("knob '" + knob.id + "': empty discrete set");
    }
  } else if (const auto* pi = std::get_if<PositiveInteger>(&knob.domain)) {
    if (pi->max < 1) {
      throw ConfigError("knob '" + knob.id + "': positive-integer max < 1");
    }
  }
}

namespace {

bool numbers_equal(const KnobValue& a, const KnobValue& b) {
  return a.get<double>() == b.get<double>();
}

}  // namespace

bool validate_value(const Knob& knob, const KnobValue& value) {
  if (const auto* iv = std::get_if<ContinuousInterval>(&knob.domain)) {
    if (!value.is_number()) return false;
    const double v = value.get<double>();
    return std::isfinite(v) && v >= iv->lo && v <= iv->hi;
  }
  if (const auto* ds = std::get_if<DiscreteValues>(&knob.domain)) {
    for (const KnobValue& candidate : ds->values) {
      if (candidate.is_number() && value.is_number()) {
        if (numbers_equal(candidate, value)) return true;
      } else if (candidate == value) {
        return true;
      }
    }
    return false;
  }
  const auto& pi = std::get<PositiveInteger>(knob.domain);
  if (!value.is_number_integer() && !value.is_number_unsigned()) return false;
  const long long v = value.get<long long>();
  return v >= 1 && v <= pi.max;
}

bool knob_value_less(const KnobValue& a, const KnobValue& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() < b.get<double>();
  return a.dump() < b.dump();
}

}  // namespace slimkit

#include <doctest.h>

#include <random>

#include "slimkit/engine.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/instantiations.hpp"
#include "slimkit/rules.hpp"

#include "helpers.hpp"

using namespace slimkit;

TEST_CASE("validate_value: intervals, discrete sets, positive integers") {
  Knob frac{"prune.unstructured", ContinuousInterval{0.0, 1.0}};
  CHECK(validate_value(frac, 0.5));
  CHECK(validate_value(frac, 1.0));  // closed interval boundary
  CHECK(validate_value(frac, 0.0));
  CHECK_FALSE(validate_value(frac, 1.5));
  CHECK_FALSE(validate_value(frac, KnobValue("0.5")));

  DiscreteValues bits;
  for (int b : {1, 2, 4, 8, 16, 32}) bits.values.push_back(b);
  Knob bitwidth{"quant.bits", bits};
  CHECK(validate_value(bitwidth, 8));
  CHECK(validate_value(bitwidth, 8.0));  // numeric equality across json types
  CHECK_FALSE(validate_value(bitwidth, 3));

  Knob rank{"lowrank.rank", PositiveInteger{5}};
  CHECK(validate_value(rank, 1));
  CHECK(validate_value(rank, 5));
  CHECK_FALSE(validate_value(rank, 0));
  CHECK_FALSE(validate_value(rank, 6));
  CHECK_FALSE(validate_value(rank, 2.5));
}

TEST_CASE("validate_domain rejects malformed domains") {
  CHECK_THROWS_AS(validate_domain(Knob{"k", ContinuousInterval{1.0, 0.0}}), ConfigError);
  CHECK_THROWS_AS(validate_domain(Knob{"k", DiscreteValues{}}), ConfigError);
  CHECK_THROWS_AS(validate_domain(Knob{"k", PositiveInteger{0}}), ConfigError);
  CHECK_THROWS_AS(validate_domain(Knob{"", ContinuousInterval{0.0, 1.0}}), ConfigError);
}

TEST_CASE("get_rule: single registration, unknown knob, duplicate claim") {
  Instantiation inst = make_prune_instantiation(PruneMethodOptions{});
  const Rule& rule = get_rule("prune.unstructured", inst.rules);
  CHECK(rule.id == "prune.unstructured");

  CHECK_THROWS_AS(get_rule("no.such.knob", inst.rules), ConfigError);

  // Two rules claiming the same knob fail at registration time.
  Instantiation dup = inst;
  dup.rules.push_back(dup.rules.front());
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  CHECK_THROWS_AS(get_rule("prune.unstructured", dup.rules), ConfigError);
}

TEST_CASE("apply_rule: identity value leaves the model unchanged") {
  auto rng = make_rng(100);
  const Model m = testing::random_model(rng);
  Instantiation inst = make_prune_instantiation(PruneMethodOptions{});
  const Knob* knob = inst.find_knob("prune.unstructured");
  const Model out = apply_rule(get_rule("prune.unstructured", inst.rules), m, *knob, 0.0);
  CHECK(models_equal(m, out));
}

TEST_CASE("apply_rule: out-of-domain value is a domain error") {
  auto rng = make_rng(101);
  const Model m = testing::random_model(rng);
  Instantiation inst = make_prune_instantiation(PruneMethodOptions{});
  const Knob* knob = inst.find_knob("prune.unstructured");
  CHECK_THROWS_AS(apply_rule(get_rule("prune.unstructured", inst.rules), m, *knob, 1.5),
                  DomainError);
}

TEST_CASE("apply_rule: prune fraction 0.25 on a 16-weight layer masks exactly 4") {
  Model m = make_model(4, {}, 4, 55);  // single 4x4 layer
  Instantiation inst = make_prune_instantiation(PruneMethodOptions{});
  const Knob* knob = inst.find_knob("prune.unstructured");
  const Model out = apply_rule(get_rule("prune.unstructured", inst.rules), m, *knob, 0.25);
  CHECK(m.layers[0].alive_count() == 16);
  CHECK(out.layers[0].alive_count() == 12);
}

TEST_CASE("apply_rule: double application is deterministic and input stays intact") {
  auto rng = make_rng(321);
  Dataset calib;
  Instantiation prune = make_prune_instantiation(PruneMethodOptions{});
  Instantiation quant = make_quant_instantiation();
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  const int bit_choices[] = {1, 2, 4, 8, 16, 32};
  for (int trial = 0; trial < 40; ++trial) {
    const Model m = testing::random_model(rng);
    const Model snapshot = m;

    const bool use_prune = trial % 2 == 0;
    const Instantiation& inst = use_prune ? prune : quant;
    const std::string knob_id = use_prune ? "prune.unstructured" : "quant.bits";
    const KnobValue value = use_prune ? KnobValue(frac(rng))
                                      : KnobValue(bit_choices[trial % 6]);
    const Knob* knob = inst.find_knob(knob_id);
    const Rule& rule = get_rule(knob_id, inst.rules);

    const Model once = apply_rule(rule, m, *knob, value);
    const Model twice = apply_rule(rule, m, *knob, value);
    CHECK(models_equal(once, twice));
    CHECK(models_equal(m, snapshot));  // rule purity
  }
}

TEST_CASE("is_feasible: inclusive boundary semantics") {
  Model m = make_model(4, {}, 3, 9);  // 15 parameters
  CHECK(is_feasible(m, 15.0, kMeterParamCount));
  CHECK_FALSE(is_feasible(m, 14.99, kMeterParamCount));
  CHECK_FALSE(is_feasible(m, 0.0, kMeterParamCount));
  CHECK_THROWS_AS(is_feasible(m, -1.0, kMeterParamCount), DomainError);
}

TEST_CASE("instantiation validation catches dangling rules and duplicate knobs") {
  Instantiation inst;
  inst.name = "bad";
  inst.knobs.push_back(Knob{"a", ContinuousInterval{0.0, 1.0}});
  inst.rules.push_back(Rule{"r", "missing", [](const Model& m, const KnobValue&) {
                              return m;
                            }});
  CHECK_THROWS_AS(inst.validate(), ConfigError);

  Instantiation dup;
  dup.name = "dup";
  dup.knobs.push_back(Knob{"a", ContinuousInterval{0.0, 1.0}});
  dup.knobs.push_back(Knob{"a", ContinuousInterval{0.0, 1.0}});
  CHECK_THROWS_AS(dup.validate(), ConfigError);
}

TEST_CASE("replaying a run log from the initial model reproduces the final model") {
  auto rng = make_rng(888);
  Model m = make_model(6, {8, 6}, 3, rng());
  Dataset val = testing::random_dataset(rng, m, 20, Split::kValidation);
  Dataset train = testing::random_dataset(rng, m, 40, Split::kTrain);

  Instantiation inst = make_prune_instantiation(PruneMethodOptions{});
  EngineConfig cfg;
  cfg.budget = 0.4 * static_cast<double>(param_count(m));
  cfg.max_iterations = 8;  // no fine-tuning: replay must be exact
  Policy policy;
  GreedyPolicy greedy;
  greedy.grid.values["prune.unstructured"] = {0.2, 0.4};
  policy.kind = greedy;

  const RunResult result = budgeted_run(m, cfg, inst, policy, train, val);
  REQUIRE(result.log.size() > 0);

  Model replay = m;
  for (const TransformationRecord& rec : result.log) {
    const Knob* knob = inst.find_knob(rec.knob_id);
    REQUIRE(knob != nullptr);
    replay = apply_rule(get_rule(rec.knob_id, inst.rules), replay, *knob, rec.value);
  }
  CHECK(models_equal(replay, result.model));
}

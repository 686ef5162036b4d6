#include <doctest.h>

#include <random>
#include <sstream>

#include "slimkit/data.hpp"
#include "slimkit/engine.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/instantiations.hpp"

#include "helpers.hpp"

using namespace slimkit;

namespace {

struct Fixture {
  Model model;
  Dataset train;
  Dataset val;
};

Fixture make_fixture(std::uint64_t seed, std::vector<std::size_t> hidden = {8, 6}) {
  DatasetSpec spec;
  spec.n = 80;
  spec.dims = 5;
  spec.classes = 3;
  spec.noise = 0.7;
  const DataBundle data = generate_dataset(spec, seed);
  Fixture f{make_model(5, hidden, 3, seed), data.train, data.validation};
  return f;
}

Policy greedy_prune_policy(std::vector<KnobValue> fractions) {
  Policy p;
  GreedyPolicy g;
  g.grid.values["prune.unstructured"] = std::move(fractions);
  p.kind = g;
  return p;
}

}  // namespace

TEST_CASE("engine: already-feasible model returns success with an empty log") {
  const Fixture f = make_fixture(1);
  EngineConfig cfg;
  cfg.budget = 1e9;
  cfg.max_iterations = 5;
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   greedy_prune_policy({0.3}), f.train, f.val);
  CHECK(r.outcome == Outcome::kSuccess);
  CHECK(r.log.empty());
  CHECK(r.stop_reason == StopReason::kBudgetMet);
  CHECK(models_equal(r.model, f.model));
}

TEST_CASE("engine: zero budget with biases that cannot be pruned away fails") {
  const Fixture f = make_fixture(2);
  EngineConfig cfg;
  cfg.budget = 0.0;
  cfg.max_iterations = 10;
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   greedy_prune_policy({0.5, 1.0}), f.train, f.val);
  CHECK(r.outcome == Outcome::kFailure);
  CHECK(r.final.cost > 0.0);
  CHECK(static_cast<int>(r.log.size()) <= cfg.max_iterations);
}

TEST_CASE("engine: prune-only greedy run reaches a 50% parameter budget") {
  const Fixture f = make_fixture(3);
  EngineConfig cfg;
  cfg.budget = 0.5 * static_cast<double>(param_count(f.model));
  cfg.max_iterations = 10;
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   greedy_prune_policy({0.2, 0.4}), f.train, f.val);
  CHECK(r.outcome == Outcome::kSuccess);
  CHECK(r.final.cost <= cfg.budget);
  REQUIRE(r.log.size() > 0);
  // Strictly decreasing accepted costs; contiguous steps from 1.
  double prev = r.initial.cost;
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].step == static_cast<int>(i) + 1);
    CHECK(r.log[i].pre.cost == prev);
    CHECK(r.log[i].post.cost < r.log[i].pre.cost);
    prev = r.log[i].post.cost;
  }
}

TEST_CASE("engine: non-reducing proposal breaks without being logged") {
  const Fixture f = make_fixture(4);
  EngineConfig cfg;
  cfg.budget = 1.0;  // unreachable
  cfg.max_iterations = 10;
  Policy p;
  ScheduledPolicy sched;
  sched.steps = {{"prune.unstructured", KnobValue(0.0)}};  // no-op transformation
  p.kind = sched;
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   p, f.train, f.val);
  CHECK(r.outcome == Outcome::kFailure);
  CHECK(r.stop_reason == StopReason::kNonReducing);
  CHECK(r.log.empty());
  REQUIRE(r.rejected_cost.has_value());
  CHECK(*r.rejected_cost >= r.final.cost);
}

TEST_CASE("engine: policy exhaustion ends the run") {
  const Fixture f = make_fixture(5);
  EngineConfig cfg;
  cfg.budget = 1.0;
  cfg.max_iterations = 10;
  Policy p;
  ScheduledPolicy sched;
  sched.steps = {{"prune.unstructured", KnobValue(0.5)}};
  p.kind = sched;
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   p, f.train, f.val);
  CHECK(r.outcome == Outcome::kFailure);
  CHECK(r.stop_reason == StopReason::kPolicyExhausted);
  CHECK(r.log.size() == 1);
}

TEST_CASE("engine: accepted iterations never exceed max_iterations") {
  const Fixture f = make_fixture(6);
  EngineConfig cfg;
  cfg.budget = 1.0;  // forces the loop to run out of iterations
  cfg.max_iterations = 3;
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   greedy_prune_policy({0.2, 0.3}), f.train, f.val);
  CHECK(r.log.size() <= 3);
  if (r.log.size() == 3 && r.final.cost > cfg.budget) {
    CHECK(r.stop_reason == StopReason::kMaxIterations);
    CHECK(r.outcome == Outcome::kFailure);
  }
}

TEST_CASE("engine: policy picking an unknown knob is a configuration error, not Failure") {
  const Fixture f = make_fixture(7);
  EngineConfig cfg;
  cfg.budget = 1.0;
  cfg.max_iterations = 3;
  Policy p;
  ScheduledPolicy sched;
  sched.steps = {{"quant.bits", KnobValue(8)}};  // not part of the prune instantiation
  p.kind = sched;
  CHECK_THROWS_AS(budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                               p, f.train, f.val),
                  ConfigError);

  ScheduledPolicy bad_value;
  bad_value.steps = {{"prune.unstructured", KnobValue(2.0)}};  // outside [0,1]
  p.kind = bad_value;
  CHECK_THROWS_AS(budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                               p, f.train, f.val),
                  ConfigError);
}

TEST_CASE("engine: fine-tuning changes quality but never cost") {
  const Fixture f = make_fixture(8);
  EngineConfig cfg;
  cfg.budget = 0.55 * static_cast<double>(param_count(f.model));
  cfg.max_iterations = 6;
  cfg.finetune = FinetuneSpec{3, 0.05, 16};
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   greedy_prune_policy({0.25, 0.5}), f.train, f.val);
  CHECK(r.outcome == Outcome::kSuccess);
  for (const TransformationRecord& rec : r.log) {
    CHECK(rec.post.cost < rec.pre.cost);  // invariance enforced inside the loop
  }
}

TEST_CASE("fine_tune: zero epochs, mask preservation, and loss improvement") {
  DatasetSpec spec;
  spec.n = 200;
  spec.dims = 4;
  spec.classes = 2;
  spec.noise = 0.3;
  const DataBundle data = generate_dataset(spec, 909);
  Model m = make_model(4, {8}, 2, 909);
  m.layers[0].mask(0, 0) = 0.0;
  m.layers[0].mask(3, 2) = 0.0;

  CHECK(models_equal(fine_tune(m, data.train, 0, 0.05), m));

  const double before = loss(m, data.validation, LossKind::kCrossEntropy);
  const Model tuned = fine_tune(m, data.train, 50, 0.1);
  const double after = loss(tuned, data.validation, LossKind::kCrossEntropy);
  CHECK(after < before);

  // Masked weights keep zero effect: stored values untouched, masks intact.
  CHECK(tuned.layers[0].mask(0, 0) == 0.0);
  CHECK(tuned.layers[0].weights(0, 0) == m.layers[0].weights(0, 0));
  CHECK(param_count(tuned) == param_count(m));
}

TEST_CASE("composed: single-instantiation composition matches budgeted_run") {
  const Fixture f = make_fixture(10);
  EngineConfig cfg;
  cfg.budget = 0.5 * static_cast<double>(param_count(f.model));
  cfg.max_iterations = 8;
  const Instantiation inst = make_prune_instantiation(PruneMethodOptions{});
  const Policy policy = greedy_prune_policy({0.2, 0.4});
  const RunResult a = budgeted_run(f.model, cfg, inst, policy, f.train, f.val);
  const RunResult b = composed_run(f.model, cfg, {inst}, policy, f.train, f.val);
  CHECK(a.outcome == b.outcome);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].knob_id == b.log[i].knob_id);
    CHECK(a.log[i].value == b.log[i].value);
    CHECK(a.log[i].post.cost == b.log[i].post.cost);
  }
  CHECK(models_equal(a.model, b.model));
}

TEST_CASE("composed: scheduled prune -> quantize keeps prune steps first") {
  const Fixture f = make_fixture(11);
  EngineConfig cfg;
  cfg.max_iterations = 8;
  cfg.cost_meter = kMeterMemoryBytes;
  cfg.budget = 0.2 * memory_bytes(f.model);
  Policy p;
  ScheduledPolicy sched;
  sched.steps = {{"prune.unstructured", KnobValue(0.5)},
                 {"quant.bits", KnobValue(8)},
                 {"quant.bits", KnobValue(4)}};
  p.kind = sched;
  const std::vector<Instantiation> insts = {make_prune_instantiation(PruneMethodOptions{}),
                                            make_quant_instantiation()};
  const RunResult r = composed_run(f.model, cfg, insts, p, f.train, f.val);
  CHECK(r.outcome == Outcome::kSuccess);
  REQUIRE(r.log.size() >= 2);
  bool seen_quant = false;
  for (const TransformationRecord& rec : r.log) {
    if (rec.instantiation == "quant") seen_quant = true;
    if (rec.instantiation == "prune") CHECK_FALSE(seen_quant);
  }
  CHECK(r.log.front().instantiation == "prune");
}

TEST_CASE("composed: knob-id collision across instantiations is a configuration error") {
  const Fixture f = make_fixture(12);
  EngineConfig cfg;
  cfg.budget = 10.0;
  cfg.max_iterations = 2;
  const std::vector<Instantiation> insts = {make_prune_instantiation(PruneMethodOptions{}),
                                            make_prune_instantiation(PruneMethodOptions{})};
  CHECK_THROWS_AS(composed_run(f.model, cfg, insts, greedy_prune_policy({0.5}),
                               f.train, f.val),
                  ConfigError);
}

TEST_CASE("composed: aggregate meters drive the loop") {
  const Fixture f = make_fixture(13);
  EngineConfig cfg;
  cfg.max_iterations = 8;
  AggregateSpec agg;
  agg.cost_weights = {{kMeterParamCount, 0.5}, {kMeterMemoryBytes, 0.5}};
  agg.quality_weights = {{kMeterValAccuracy, 1.0}};
  cfg.aggregate = agg;
  const MeterEvaluator meters(cfg.cost_meter, cfg.quality_meter, agg, &f.val);
  cfg.budget = 0.4 * meters.measure(f.model).cost;

  Policy p;
  ScheduledPolicy sched;
  sched.steps = {{"prune.unstructured", KnobValue(0.5)}, {"quant.bits", KnobValue(8)}};
  p.kind = sched;
  const std::vector<Instantiation> insts = {make_prune_instantiation(PruneMethodOptions{}),
                                            make_quant_instantiation()};
  const RunResult r = composed_run(f.model, cfg, insts, p, f.train, f.val);
  CHECK(r.outcome == Outcome::kSuccess);
  CHECK(r.final.cost <= cfg.budget);
  CHECK(r.initial.cost_meter_id == "aggregate");
}

TEST_CASE("engine: monotonicity holds across randomized configurations") {
  auto rng = make_rng(5150);
  for (int trial = 0; trial < 12; ++trial) {
    const Fixture f = make_fixture(6000 + trial);
    EngineConfig cfg;
    cfg.max_iterations = 1 + static_cast<int>(rng() % 6);
    cfg.budget = (0.2 + 0.5 * static_cast<double>(rng() % 100) / 100.0) *
                 static_cast<double>(param_count(f.model));
    std::vector<KnobValue> fractions;
    const std::size_t n_fracs = 1 + rng() % 3;
    for (std::size_t i = 0; i < n_fracs; ++i) {
      fractions.push_back(0.05 + 0.9 * static_cast<double>(rng() % 100) / 100.0);
    }
    const RunResult r =
        budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                     greedy_prune_policy(fractions), f.train, f.val);
    double prev = r.initial.cost;
    for (const TransformationRecord& rec : r.log) {
      CHECK(rec.post.cost < prev);
      prev = rec.post.cost;
    }
    CHECK(r.final.cost <= r.initial.cost);
    CHECK(static_cast<int>(r.log.size()) <= cfg.max_iterations);
  }
}

TEST_CASE("scheduled policy replays exactly: identical runs, identical logs") {
  const Fixture f = make_fixture(15);
  EngineConfig cfg;
  cfg.cost_meter = kMeterMemoryBytes;
  cfg.budget = 0.1 * memory_bytes(f.model);
  cfg.max_iterations = 6;
  cfg.finetune = FinetuneSpec{2, 0.05, 20};
  Policy p;
  ScheduledPolicy sched;
  sched.steps = {{"prune.unstructured", KnobValue(0.4)}, {"quant.bits", KnobValue(8)}};
  p.kind = sched;
  const std::vector<Instantiation> insts = {make_prune_instantiation(PruneMethodOptions{}),
                                            make_quant_instantiation()};
  const RunResult a = composed_run(f.model, cfg, insts, p, f.train, f.val);
  const RunResult b = composed_run(f.model, cfg, insts, p, f.train, f.val);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    nlohmann::json ja = record_to_json(a.log[i]);
    nlohmann::json jb = record_to_json(b.log[i]);
    ja.erase("timing");
    jb.erase("timing");
    CHECK(ja == jb);
  }
  CHECK(models_equal(a.model, b.model));
}

TEST_CASE("per-layer quantization knobs drive the composed loop") {
  const Fixture f = make_fixture(16);
  EngineConfig cfg;
  cfg.cost_meter = kMeterMemoryBytes;
  cfg.budget = 0.4 * memory_bytes(f.model);
  cfg.max_iterations = 6;
  Policy p;
  GreedyPolicy g;
  g.grid.values["quant.bits.L0"] = {8, 4};
  g.grid.values["quant.bits.L1"] = {8, 4};
  g.grid.values["quant.bits.L2"] = {8};
  p.kind = g;
  const RunResult r = budgeted_run(f.model, cfg, make_quant_instantiation(true, &f.model),
                                   p, f.train, f.val);
  CHECK(r.outcome == Outcome::kSuccess);
  bool any_per_layer = false;
  for (const TransformationRecord& rec : r.log) {
    if (rec.knob_id.rfind("quant.bits.L", 0) == 0) any_per_layer = true;
  }
  CHECK(any_per_layer);
}

TEST_CASE("run log writer emits parseable JSON lines with separated timing") {
  const Fixture f = make_fixture(14);
  EngineConfig cfg;
  cfg.budget = 0.5 * static_cast<double>(param_count(f.model));
  cfg.max_iterations = 6;
  std::ostringstream sink;
  RunLogWriter writer(sink);
  writer.header({{"note", "test"}}, 14);
  const RunResult r = budgeted_run(f.model, cfg, make_prune_instantiation(PruneMethodOptions{}),
                                   greedy_prune_policy({0.3}), f.train, f.val, &writer);
  REQUIRE(r.log.size() > 0);

  std::istringstream lines(sink.str());
  std::string line;
  std::size_t n_lines = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    if (n_lines == 0) {
      CHECK(j["type"] == "header");
      CHECK(j["format_version"] == 1);
      CHECK(j["seed"] == 14);
    } else if (n_lines == 1) {
      CHECK(j["type"] == "initial");
    } else {
      CHECK(j.contains("timing"));
      CHECK(j["timing"].contains("rule_seconds"));
      CHECK(j.contains("pre"));
      CHECK(j.contains("post"));
    }
    ++n_lines;
  }
  CHECK(n_lines == 2 + r.log.size());
}

#include "slimkit/instantiations.hpp"

#include <algorithm>
#include <string>

#include "slimkit/arch.hpp"
#include "slimkit/distillation.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/quantization.hpp"
#include "slimkit/rng.hpp"

namespace slimkit {

Instantiation make_prune_instantiation(const PruneMethodOptions& opts, const Dataset* calib) {
  if (!opts.include_unstructured && !opts.include_structured) {
    throw ConfigError("prune instantiation: no pruning variant enabled");
  }
  Instantiation inst;
  inst.name = "prune";
  inst.cost_meters = {kMeterParamCount, kMeterFlops};
  inst.quality_meters = {kMeterValAccuracy};
  const PruneCriterion criterion = opts.criterion;
  if (opts.include_unstructured) {
    inst.knobs.push_back(Knob{"prune.unstructured", ContinuousInterval{0.0, 1.0}});
    inst.rules.push_back(Rule{
        "prune.unstructured", "prune.unstructured",
        [criterion, calib](const Model& m, const KnobValue& v) {
          return prune_unstructured(m, v.get<double>(), criterion, calib);
        }});
  }
  if (opts.include_structured) {
    inst.knobs.push_back(Knob{"prune.structured", ContinuousInterval{0.0, 1.0}});
    inst.rules.push_back(Rule{
        "prune.structured", "prune.structured",
        [criterion, calib](const Model& m, const KnobValue& v) {
          return prune_structured(m, v.get<double>(), criterion, calib);
        }});
  }
  inst.validate();
  return inst;
}

Instantiation make_quant_instantiation(bool per_layer, const Model* shape) {
  Instantiation inst;
  inst.name = "quant";
  inst.cost_meters = {kMeterMemoryBytes};
  inst.quality_meters = {kMeterValAccuracy};
  DiscreteValues bits;
  for (int b : kAllowedBits) bits.values.push_back(b);
  if (!per_layer) {
    inst.knobs.push_back(Knob{"quant.bits", std::move(bits)});
    inst.rules.push_back(Rule{"quant.bits", "quant.bits",
                              [](const Model& m, const KnobValue& v) {
                                return quantize_model(m, v.get<int>());
                              }});
  } else {
    if (shape == nullptr) {
      throw ConfigError("quant instantiation: per-layer knobs need a model shape");
    }
    for (std::size_t i = 0; i < shape->layers.size(); ++i) {
      const std::string id = "quant.bits.L" + std::to_string(i);
      inst.knobs.push_back(Knob{id, bits});
      inst.rules.push_back(Rule{id, id, [i](const Model& m, const KnobValue& v) {
                                  return quantize_layer(m, i, v.get<int>());
                                }});
    }
  }
  inst.validate();
  return inst;
}

Instantiation make_distill_instantiation(const DistillMethodOptions& opts,
                                         const Dataset& train) {
  if (opts.student_values.empty()) {
    throw ConfigError("distill instantiation: no student specs given");
  }
  for (const KnobValue& v : opts.student_values) {
    if (!v.is_object() || !v.contains("layers") || !v["layers"].is_array() ||
        !v.contains("seed")) {
      throw ConfigError("distill student value must be {\"layers\": [...], \"seed\": n}");
    }
  }
  Instantiation inst;
  inst.name = "distill";
  inst.cost_meters = {kMeterParamCount};
  inst.quality_meters = {kMeterValAccuracy};
  inst.knobs.push_back(Knob{"distill.student", DiscreteValues{opts.student_values}});
  const DistillMethodOptions captured = opts;
  inst.rules.push_back(Rule{
      "distill.student", "distill.student",
      [captured, &train](const Model& teacher, const KnobValue& v) {
        DistillKnobs knobs;
        knobs.student_spec = v["layers"].get<std::vector<std::size_t>>();
        knobs.temperature = captured.temperature;
        knobs.loss_weight = captured.loss_weight;
        return distill(teacher, knobs, train, captured.epochs, captured.lr,
                       v["seed"].get<std::uint64_t>(), captured.batch_size);
      }});
  inst.validate();
  return inst;
}

Instantiation make_arch_instantiation(const Model& shape, const ArchMethodOptions& opts) {
  Instantiation inst;
  inst.name = "arch";
  inst.cost_meters = {kMeterParamCount, kMeterFlops};
  inst.quality_meters = {kMeterValAccuracy};
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const auto max_rank = static_cast<long long>(
        std::min(shape.layers[i].out_dim(), shape.layers[i].in_dim()));
    if (max_rank < 1) continue;
    const std::string suffix = ".L" + std::to_string(i);
    inst.knobs.push_back(Knob{"lowrank.rank" + suffix, PositiveInteger{max_rank}});
    inst.rules.push_back(Rule{"lowrank.rank" + suffix, "lowrank.rank" + suffix,
                              [i](const Model& m, const KnobValue& v) {
                                return lowrank_factorize(m, i, v.get<std::size_t>());
                              }});
    if (opts.include_adapters) {
      const std::uint64_t seed_base = opts.adapter_seed;
      inst.knobs.push_back(Knob{"adapter.rank" + suffix, PositiveInteger{max_rank}});
      inst.rules.push_back(
          Rule{"adapter.rank" + suffix, "adapter.rank" + suffix,
               [i, seed_base](const Model& m, const KnobValue& v) {
                 const auto rank = v.get<std::size_t>();
                 // Seed fixed by (base, layer, rank): deterministic per value.
                 const std::uint64_t seed =
                     mix_seed(seed_base ^ (static_cast<std::uint64_t>(i) << 32) ^ rank);
                 return inject_adapter(m, i, rank, seed);
               }});
    }
  }
  if (!opts.resize_values.empty()) {
    for (const KnobValue& v : opts.resize_values) {
      if (!v.is_object() || !v.contains("depth") || !v.contains("width") ||
          !v.contains("seed")) {
        throw ConfigError("resize value must be {\"depth\": d, \"width\": w, \"seed\": n}");
      }
    }
    inst.knobs.push_back(Knob{"resize.spec", DiscreteValues{opts.resize_values}});
    inst.rules.push_back(Rule{"resize.spec", "resize.spec",
                              [](const Model& m, const KnobValue& v) {
                                return resize(m, v["depth"].get<std::size_t>(),
                                              v["width"].get<std::size_t>(),
                                              v["seed"].get<std::uint64_t>());
                              }});
  }
  if (inst.knobs.empty()) {
    throw ConfigError("arch instantiation: model shape offers no applicable knob");
  }
  inst.validate();
  return inst;
}

Instantiation make_share_instantiation(const Model& shape) {
  Instantiation inst;
  inst.name = "share";
  inst.cost_meters = {kMeterMemoryBytes};
  inst.quality_meters = {kMeterValAccuracy};
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const auto alive = static_cast<long long>(shape.layers[i].alive_count());
    if (alive < 1) continue;
    const std::string id = "share.clusters.L" + std::to_string(i);
    inst.knobs.push_back(Knob{id, PositiveInteger{alive}});
    inst.rules.push_back(Rule{id, id, [i](const Model& m, const KnobValue& v) {
                                return weight_share(m, i, v.get<std::size_t>());
                              }});
  }
  if (inst.knobs.empty()) {
    throw ConfigError("share instantiation: model has no alive weights");
  }
  inst.validate();
  return inst;
}

}  // namespace slimkit

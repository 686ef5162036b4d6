#include "slimkit/meters.hpp"

#include <cmath>

#include "slimkit/errors.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

std::size_t param_count(const Model& model) {
  std::size_t total = 0;
  for (const DenseLayer& layer : model.layers) {
    if (layer.lowrank) {
      total += layer.lowrank->u.size() + layer.lowrank->v.size();
    } else {
      total += layer.alive_count();
    }
    if (layer.adapter) {
      total += layer.adapter->a.size() + layer.adapter->b.size();
    }
    total += layer.bias.size();
  }
  return total;
}

std::size_t flops(const Model& model) {
  std::size_t total = 0;
  for (const DenseLayer& layer : model.layers) {
    if (layer.lowrank) {
      const std::size_t r = layer.lowrank->u.cols;
      total += 2 * r * (layer.in_dim() + layer.out_dim());
    } else {
      total += 2 * layer.in_dim() * layer.out_dim();
    }
    if (layer.adapter) {
      const std::size_t r = layer.adapter->a.rows;
      total += 2 * r * (layer.in_dim() + layer.out_dim());
    }
  }
  return total;
}

double memory_bytes(const Model& model) {
  double total = 0.0;
  for (const DenseLayer& layer : model.layers) {
    const double bytes_per = layer.quant_bits ? static_cast<double>(*layer.quant_bits) / 8.0
                                              : 8.0;
    if (layer.lowrank) {
      total += static_cast<double>(layer.lowrank->u.size() + layer.lowrank->v.size()) * bytes_per;
    } else if (layer.shared_clusters) {
      const double k = static_cast<double>(*layer.shared_clusters);
      const double index_bits = k > 1.0 ? std::ceil(std::log2(k)) : 0.0;
      total += k * 8.0;  // codebook, 64-bit centers
      total += static_cast<double>(layer.alive_count()) * index_bits / 8.0;
    } else {
      total += static_cast<double>(layer.alive_count()) * bytes_per;
    }
    if (layer.adapter) {
      total += static_cast<double>(layer.adapter->a.size() + layer.adapter->b.size()) * bytes_per;
    }
    total += static_cast<double>(layer.bias.size()) * 8.0;  // biases stay 64-bit
  }
  return total;
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw DomainError("accuracy: empty dataset");
  if (data.split != Split::kValidation) {
    throw DomainError("accuracy: quality meters run on the Validation split only");
  }
  const Matrix logits = forward(model, data.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (logits(i, j) > logits(i, best)) best = j;  // ties keep the lower index
    }
    if (best == static_cast<std::size_t>(data.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

bool is_cost_meter(const std::string& id) {
  return id == kMeterParamCount || id == kMeterFlops || id == kMeterMemoryBytes;
}

bool is_quality_meter(const std::string& id) {
  return id == kMeterValAccuracy || id == kMeterNegValLoss;
}

double eval_cost_meter(const std::string& id, const Model& model) {
  if (id == kMeterParamCount) return static_cast<double>(param_count(model));
  if (id == kMeterFlops) return static_cast<double>(flops(model));
  if (id == kMeterMemoryBytes) return memory_bytes(model);
  throw ConfigError("unknown cost meter '" + id + "'");
}

double eval_quality_meter(const std::string& id, const Model& model, const Dataset& val) {
  if (id == kMeterValAccuracy) return accuracy(model, val);
  if (id == kMeterNegValLoss) {
    if (val.split != Split::kValidation) {
      throw DomainError("neg_val_loss: quality meters run on the Validation split only");
    }
    return -loss(model, val, LossKind::kCrossEntropy);
  }
  throw ConfigError("unknown quality meter '" + id + "'");
}

namespace {

double weighted_sum(const std::map<std::string, double>& weights,
                    const std::vector<MeterReading>& readings, bool cost_side) {
  double acc = 0.0;
  for (const auto& [id, weight] : weights) {
    bool found = false;
    for (const MeterReading& r : readings) {
      if (cost_side ? (r.cost_meter_id == id) : (r.quality_meter_id == id)) {
        acc += weight * (cost_side ? r.cost : r.quality);
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError("aggregate: meter '" + id + "' missing from readings");
    }
  }
  return acc;
}

bool single_unit_weight(const std::map<std::string, double>& weights) {
  return weights.size() == 1 && weights.begin()->second == 1.0;
}

}  // namespace

MeterReading aggregate(const std::vector<MeterReading>& readings, const AggregateSpec& spec) {
  if (spec.cost_weights.empty() || spec.quality_weights.empty()) {
    throw ConfigError("aggregate: both weight maps need at least one entry");
  }
  MeterReading out;
  out.cost = weighted_sum(spec.cost_weights, readings, /*cost_side=*/true);
  out.quality = weighted_sum(spec.quality_weights, readings, /*cost_side=*/false);
  out.cost_meter_id =
      single_unit_weight(spec.cost_weights) ? spec.cost_weights.begin()->first : "aggregate";
  out.quality_meter_id = single_unit_weight(spec.quality_weights)
                             ? spec.quality_weights.begin()->first
                             : "aggregate";
  return out;
}

MeterEvaluator::MeterEvaluator(std::string cost_meter, std::string quality_meter,
                               std::optional<AggregateSpec> aggregate_spec, const Dataset* val)
    : cost_meter_(std::move(cost_meter)),
      quality_meter_(std::move(quality_meter)),
      aggregate_(std::move(aggregate_spec)),
      val_(val) {
  if (val_ == nullptr) throw ConfigError("MeterEvaluator: validation split required");
  if (aggregate_) {
    if (aggregate_->cost_weights.empty() || aggregate_->quality_weights.empty()) {
      throw ConfigError("MeterEvaluator: aggregate weight maps must be nonempty");
    }
    for (const auto& [id, w] : aggregate_->cost_weights) {
      if (!is_cost_meter(id)) throw ConfigError("aggregate: unknown cost meter '" + id + "'");
      if (w < 0.0) throw ConfigError("aggregate: negative weight for '" + id + "'");
    }
    for (const auto& [id, w] : aggregate_->quality_weights) {
      if (!is_quality_meter(id)) {
        throw ConfigError("aggregate: unknown quality meter '" + id + "'");
      }
      if (w < 0.0) throw ConfigError("aggregate: negative weight for '" + id + "'");
    }
  } else {
    if (!is_cost_meter(cost_meter_)) throw ConfigError("unknown cost meter '" + cost_meter_ + "'");
    if (!is_quality_meter(quality_meter_)) {
      throw ConfigError("unknown quality meter '" + quality_meter_ + "'");
    }
  }
}

MeterReading MeterEvaluator::measure(const Model& model) const {
  if (!aggregate_) {
    MeterReading r;
    r.cost = eval_cost_meter(cost_meter_, model);
    r.quality = eval_quality_meter(quality_meter_, model, *val_);
    r.cost_meter_id = cost_meter_;
    r.quality_meter_id = quality_meter_;
    return r;
  }
  std::vector<MeterReading> parts;
  for (const auto& [id, _] : aggregate_->cost_weights) {
    MeterReading r;
    r.cost = eval_cost_meter(id, model);
    r.cost_meter_id = id;
    parts.push_back(std::move(r));
  }
  for (const auto& [id, _] : aggregate_->quality_weights) {
    MeterReading r;
    r.quality = eval_quality_meter(id, model, *val_);
    r.quality_meter_id = id;
    parts.push_back(std::move(r));
  }
  return aggregate(parts, *aggregate_);
}

}  // namespace slimkit

#include "slimkit/quantization.hpp"

#include <algorithm>
#include <cmath>

#include "slimkit/errors.hpp"
#include "slimkit/meters.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

bool valid_bitwidth(int bits) {
  for (int b : kAllowedBits) {
    if (b == bits) return true;
  }
  return false;
}

std::vector<double> quantize_uniform(std::vector<double> values, int bits) {
  if (values.empty()) throw DomainError("quantize_uniform: empty value array");
  if (!valid_bitwidth(bits)) {
    throw DomainError("quantize_uniform: bitwidth " + std::to_string(bits) +
                      " outside {1,2,4,8,16,32}");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double levels = std::pow(2.0, bits) - 1.0;
  const double delta = (hi - lo) / levels;
  if (delta == 0.0) return values;  // constant array, nothing to snap
  for (double& w : values) {
    // nearbyint under the default FE_TONEAREST mode is round-half-to-even.
    w = delta * std::nearbyint(w / delta);
  }
  return values;
}

Matrix quantize_masked(const Matrix& weights, const Matrix& mask, int bits) {
  if (!same_shape(weights, mask)) throw StructuralError("quantize_masked: shape mismatch");
  std::vector<double> alive;
  alive.reserve(weights.data.size());
  for (std::size_t i = 0; i < weights.data.size(); ++i) {
    if (mask.data[i] != 0.0) alive.push_back(weights.data[i]);
  }
  Matrix out = weights;
  if (alive.empty()) return out;  // fully masked layer, grid undefined
  alive = quantize_uniform(std::move(alive), bits);
  std::size_t k = 0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (mask.data[i] != 0.0) out.data[i] = alive[k++];
  }
  return out;
}

namespace {

void snap_layer(DenseLayer& layer, int bits) {
  if (layer.lowrank) {
    layer.lowrank->u.data = quantize_uniform(std::move(layer.lowrank->u.data), bits);
    layer.lowrank->v.data = quantize_uniform(std::move(layer.lowrank->v.data), bits);
  } else {
    layer.weights = quantize_masked(layer.weights, layer.mask, bits);
  }
  if (layer.adapter) {
    layer.adapter->a.data = quantize_uniform(std::move(layer.adapter->a.data), bits);
    layer.adapter->b.data = quantize_uniform(std::move(layer.adapter->b.data), bits);
  }
}

}  // namespace

Model quantize_model(const Model& model, int bits) {
  if (!valid_bitwidth(bits)) {
    throw DomainError("quantize_model: bitwidth " + std::to_string(bits) +
                      " outside {1,2,4,8,16,32}");
  }
  Model out = model;
  for (DenseLayer& layer : out.layers) {
    snap_layer(layer, bits);
    layer.quant_bits = bits;
    layer.quant_simulated = false;
  }
  return out;
}

void requantize_inplace(DenseLayer& layer) {
  if (!layer.quant_bits) return;
  snap_layer(layer, *layer.quant_bits);
}

Model quantize_layer(const Model& model, std::size_t layer_index, int bits) {
  if (!valid_bitwidth(bits)) {
    throw DomainError("quantize_layer: bitwidth " + std::to_string(bits) +
                      " outside {1,2,4,8,16,32}");
  }
  if (layer_index >= model.layers.size()) {
    throw DomainError("quantize_layer: layer index out of range");
  }
  Model out = model;
  DenseLayer& layer = out.layers[layer_index];
  snap_layer(layer, bits);
  layer.quant_bits = bits;
  layer.quant_simulated = false;
  return out;
}

PtqResult ptq(const Model& model, int bits, const Dataset& calib, double budget,
              const std::string& cost_meter) {
  if (calib.size() == 0) throw DomainError("ptq: empty calibration set");
  PtqResult result;
  Model quantized = quantize_model(model, bits);
  result.calib_quality = accuracy(quantized, calib);
  if (eval_cost_meter(cost_meter, quantized) <= budget) {
    result.model = std::move(quantized);
  }
  return result;
}

Model qat(const Model& model, int bits, const Dataset& train, int epochs, double lr,
          int batch_size) {
  if (!valid_bitwidth(bits)) {
    throw DomainError("qat: bitwidth " + std::to_string(bits) + " outside {1,2,4,8,16,32}");
  }
  if (epochs < 0) throw DomainError("qat: negative epoch count");
  Model m = model;
  for (DenseLayer& layer : m.layers) {
    layer.quant_bits = bits;
    layer.quant_simulated = true;
  }
  if (epochs > 0) {
    TrainOptions opts;
    opts.epochs = epochs;
    opts.lr = lr;
    opts.batch_size = batch_size;
    m = train_sgd(std::move(m), train, opts);  // re-snaps and clears simulation
  } else {
    for (DenseLayer& layer : m.layers) {
      requantize_inplace(layer);
      layer.quant_simulated = false;
    }
  }
  return m;
}

}  // namespace slimkit

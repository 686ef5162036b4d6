#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slimkit/model.hpp"

namespace slimkit {

inline constexpr int kAllowedBits[] = {1, 2, 4, 8, 16, 32};

bool valid_bitwidth(int bits);

// Uniform quantizer: delta = (max - min) / (2^bits - 1), w -> delta * round(w/delta)
// with round-half-to-even. Constant arrays (delta == 0) pass through unchanged.
// Throws DomainError on empty input or a bitwidth outside {1,2,4,8,16,32}.
std::vector<double> quantize_uniform(std::vector<double> values, int bits);

// Snaps only positions where mask == 1; the grid is computed from those alive
// values so dead weights cannot distort the range.
Matrix quantize_masked(const Matrix& weights, const Matrix& mask, int bits);

// Snaps every live matrix of every layer (dense weights under their masks, or
// low-rank factors when those replace the dense path, plus adapter pairs),
// records quant_bits and clears the simulation flag. Biases stay 64-bit.
Model quantize_model(const Model& model, int bits);

// Re-snaps one layer's live matrices to the grid of its own quant_bits; no-op
// when the layer carries no bitwidth.
void requantize_inplace(DenseLayer& layer);

// Snaps a single layer, leaving the rest of the model untouched.
Model quantize_layer(const Model& model, std::size_t layer_index, int bits);

struct PtqResult {
  std::optional<Model> model;  // empty means the budget could not be met
  double calib_quality = 0.0;  // accuracy on the calibration set
};

// One-shot post-training quantization with a cost gate: quantize, evaluate on
// the calibration set, return the model only if cost <= budget.
PtqResult ptq(const Model& model, int bits, const Dataset& calib, double budget,
              const std::string& cost_meter = "memory_bytes");

// Quantization-aware training: each epoch the forward pass sees quantized
// weights while gradients flow straight through the rounding into the latent
// full-precision weights; the returned model is snapped to the final grid.
// epochs == 0 degenerates to a plain one-shot snap.
Model qat(const Model& model, int bits, const Dataset& train, int epochs, double lr,
          int batch_size = 32);

}  // namespace slimkit

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slimkit/matrix.hpp"

namespace slimkit {

// SoftmaxOutput marks a layer whose normalization is fused into the loss;
// forward() returns raw logits for it, exactly like Identity.
enum class Activation { kReLU, kIdentity, kSoftmaxOutput };

struct LowRankFactors {
  Matrix u;  // out x r
  Matrix v;  // r x in
};

struct AdapterPair {
  Matrix a;  // r x in, random init
  Matrix b;  // out x r, zero init so injection is output-preserving
};

// One fully connected layer plus every attachment the transformation rules can
// hang on it. The effective weight used by forward/backward is
//   base = (weights .* mask)            when no low-rank factors are present
//   base = u * v                        when factors are present (dense weights
//                                        are kept only as provenance)
//   effective = base + b * a            when an adapter is attached.
// When quant_simulated is set and quant_bits is present, every matrix on the
// live path is snapped to its quantization grid on the fly while the stored
// values stay full precision (training-time simulation).
struct DenseLayer {
  Matrix weights;            // out x in
  std::vector<double> bias;  // out
  Matrix mask;               // out x in, entries in {0,1}
  Activation activation = Activation::kReLU;
  std::optional<int> quant_bits;                // in {1,2,4,8,16,32}
  bool quant_simulated = false;
  bool base_frozen = false;                     // weights+bias excluded from SGD
  std::optional<std::size_t> shared_clusters;   // weight-sharing codebook size
  std::optional<LowRankFactors> lowrank;
  std::optional<AdapterPair> adapter;

  std::size_t out_dim() const { return weights.rows; }
  std::size_t in_dim() const { return weights.cols; }
  std::size_t alive_count() const;  // mask entries equal to 1
  bool factorized() const { return lowrank.has_value(); }
};

// Matrix actually multiplied by the input, with masks, factors, adapters and
// quantization simulation applied.
Matrix effective_weights(const DenseLayer& layer);

struct Model {
  std::vector<DenseLayer> layers;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;

  // Throws StructuralError if layer dimensions do not chain or masks/attachments
  // have inconsistent shapes.
  void validate() const;
};

// Fresh network with `hidden` ReLU layers between input_dim and output_dim.
// Weights uniform(-s, s) with s = sqrt(6/(in+out)), masks all ones, bias zero.
Model make_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                 std::size_t output_dim, std::uint64_t seed,
                 Activation output_activation = Activation::kSoftmaxOutput);

enum class Split { kTrain, kValidation };

struct Dataset {
  Matrix inputs;            // n x input_dim
  std::vector<int> labels;  // class indices, length n
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
};

// Batch of logits, n x output_dim. Throws StructuralError on dimension mismatch.
Matrix forward(const Model& model, const Matrix& batch);

// Exact structural + numeric equality; used by determinism contracts.
bool models_equal(const Model& a, const Model& b);

}  // namespace slimkit

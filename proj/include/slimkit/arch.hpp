#pragma once

#include <cstdint>
#include <vector>

#include "slimkit/model.hpp"

namespace slimkit {

// Replaces the target layer's dense path by its best rank-r approximation
// (truncated SVD): u holds U*diag(s), v holds V^T. Dense weights and mask stay
// on the layer as provenance but leave every cost meter; quantization and
// sharing metadata are cleared because the factors are fresh 64-bit values.
// rank must satisfy 1 <= rank <= min(out, in).
Model lowrank_factorize(const Model& model, std::size_t layer_index, std::size_t rank);

// Attaches a trainable pair (a: rank x in, seeded; b: out x rank, zeros) so the
// forward pass adds b*a*x. Zero-initialized b makes injection output-preserving.
// Freezes the layer's base weights and bias.
Model inject_adapter(const Model& model, std::size_t layer_index, std::size_t rank,
                     std::uint64_t seed);

// Structural rebuild: `depth` hidden layers of `width` units between the same
// input/output dims, freshly seeded. Not function-preserving; quality typically
// collapses until fine-tuned.
Model resize(const Model& model, std::size_t depth, std::size_t width, std::uint64_t seed);

// Clusters the layer's alive dense weights into `clusters` groups by 1-D
// k-means (quantile init, 20 Lloyd iterations) and snaps each weight to its
// center. Layers whose dense path was replaced by low-rank factors cannot be
// shared. 1 <= clusters <= alive weights.
Model weight_share(const Model& model, std::size_t layer_index, std::size_t clusters);

// Re-runs the clustering on one layer in place; used after fine-tuning so the
// codebook metadata stays truthful.
void apply_weight_sharing(DenseLayer& layer, std::size_t clusters);

// SGD over whatever is trainable (adapters, low-rank factors, unfrozen
// layers); throws ConfigError when nothing is. Frozen base weights are
// untouched bit for bit.
Model peft_finetune(const Model& model, const Dataset& train, int epochs, double lr,
                    int batch_size = 32);

struct Kmeans1d {
  std::vector<double> centers;
  std::vector<int> assignment;  // per input value, index into centers
};

// Deterministic 1-D k-means: initial centers at the (i+0.5)/k quantiles of the
// sorted values, fixed 20 iterations, ties to the lower center index.
Kmeans1d kmeans_1d(const std::vector<double>& values, std::size_t k);

}  // namespace slimkit

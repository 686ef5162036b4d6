#pragma once

#include <vector>

#include "slimkit/model.hpp"

namespace slimkit {

enum class LossKind { kCrossEntropy, kMse };

// Gradient slots mirror the parameters present on each layer. Slots for
// absent attachments stay empty; frozen parameters carry zero gradients.
struct LayerGradients {
  Matrix weights;
  std::vector<double> bias;
  Matrix lowrank_u, lowrank_v;
  Matrix adapter_a, adapter_b;
};

struct Gradients {
  std::vector<LayerGradients> layers;
};

// Mean per-example loss. CrossEntropy applies a stable log-softmax to the
// logits; Mse compares logits against one-hot targets, averaged over classes.
// Throws DomainError on an empty dataset.
double loss(const Model& model, const Dataset& data, LossKind kind);

// Backprop from an arbitrary d(loss)/d(logits); the hook every training loop
// (task loss, distillation loss) funnels through. Masked-out weights receive
// exactly zero gradient; frozen layers receive zero weight/bias gradients;
// quantization-simulated layers evaluate at snapped weights with the rounding
// treated as identity (straight-through).
Gradients backward_from_logit_grad(const Model& model, const Matrix& batch,
                                   const Matrix& logit_grad);

// Convenience wrapper computing the logit gradient of `kind` first.
Gradients backward(const Model& model, const Matrix& batch, const std::vector<int>& labels,
                   LossKind kind = LossKind::kCrossEntropy);

// p <- p - lr * g for trainable parameters only; masks and metadata untouched.
// Throws DomainError for lr < 0 and StructuralError on shape mismatch.
// lr == 0 returns the model unchanged.
Model sgd_step(Model model, const Gradients& grads, double lr);

// softmax(logits / temperature), numerically stable. temperature <= 0 is a
// DomainError.
std::vector<double> softmax_temp(const std::vector<double>& logits, double temperature);

// KL(p || q) with q floored at 1e-12 inside the log so degenerate references
// cannot produce -inf. Zero entries of p contribute zero.
double kl_div(const std::vector<double>& p, const std::vector<double>& q);

struct TrainOptions {
  int epochs = 1;
  double lr = 0.05;
  int batch_size = 32;
  LossKind loss = LossKind::kCrossEntropy;
};

// Deterministic mini-batch SGD: sequential batches in dataset order, no
// shuffling. Layers carrying quant_bits are trained with simulated
// quantization and re-snapped to their grid afterwards; layers carrying
// shared_clusters are re-clustered afterwards so the codebook stays truthful.
Model train_sgd(Model model, const Dataset& train, const TrainOptions& opts);

}  // namespace slimkit

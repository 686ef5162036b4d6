#include "slimkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slimkit/arch.hpp"
#include "slimkit/errors.hpp"
#include "slimkit/quantization.hpp"

namespace slimkit {

namespace {

void check_labels(const Model& model, const std::vector<int>& labels) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.output_dim) {
      throw StructuralError("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(model.output_dim) + ")");
    }
  }
}

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      const double e = std::exp(logits(i, j) - mx);
      p(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= sum;
  }
  return p;
}

Matrix loss_logit_grad(const Matrix& logits, const std::vector<int>& labels, LossKind kind) {
  const double n = static_cast<double>(logits.rows);
  Matrix g(logits.rows, logits.cols);
  if (kind == LossKind::kCrossEntropy) {
    g = softmax_rows(logits);
    for (std::size_t i = 0; i < logits.rows; ++i) {
      g(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    for (double& v : g.data) v /= n;
  } else {
    const double c = static_cast<double>(logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
      for (std::size_t j = 0; j < logits.cols; ++j) {
        const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
        g(i, j) = 2.0 * (logits(i, j) - target) / (n * c);
      }
    }
  }
  return g;
}

}  // namespace

double loss(const Model& model, const Dataset& data, LossKind kind) {
  if (data.size() == 0) throw DomainError("loss: empty dataset");
  check_labels(model, data.labels);
  const Matrix logits = forward(model, data.inputs);
  double total = 0.0;
  if (kind == LossKind::kCrossEntropy) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
      double mx = logits(i, 0);
      for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(logits(i, j) - mx);
      const double log_z = mx + std::log(sum);
      total += log_z - logits(i, static_cast<std::size_t>(data.labels[i]));
    }
  } else {
    const double c = static_cast<double>(logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < logits.cols; ++j) {
        const double target = (static_cast<std::size_t>(data.labels[i]) == j) ? 1.0 : 0.0;
        const double d = logits(i, j) - target;
        acc += d * d;
      }
      total += acc / c;
    }
  }
  return total / static_cast<double>(data.size());
}

Gradients backward_from_logit_grad(const Model& model, const Matrix& batch,
                                   const Matrix& logit_grad) {
  if (batch.cols != model.input_dim) {
    throw StructuralError("backward: batch cols differ from model input dim");
  }
  if (logit_grad.rows != batch.rows || logit_grad.cols != model.output_dim) {
    throw StructuralError("backward: logit gradient shape mismatch");
  }

  const std::size_t depth = model.layers.size();
  // Forward caching: inputs[i] feeds layer i, preact[i] is its pre-activation,
  // eff[i] the (possibly quantization-simulated) effective weight matrix.
  std::vector<Matrix> inputs(depth), preact(depth), eff(depth);
  Matrix x = batch;
  for (std::size_t i = 0; i < depth; ++i) {
    const DenseLayer& layer = model.layers[i];
    inputs[i] = x;
    eff[i] = effective_weights(layer);
    Matrix z = matmul(x, transpose(eff[i]));
    for (std::size_t r = 0; r < z.rows; ++r)
      for (std::size_t c = 0; c < z.cols; ++c) z(r, c) += layer.bias[c];
    preact[i] = z;
    if (layer.activation == Activation::kReLU) {
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(z);
  }

  Gradients grads;
  grads.layers.resize(depth);
  Matrix dpost = logit_grad;
  for (std::size_t idx = depth; idx-- > 0;) {
    const DenseLayer& layer = model.layers[idx];
    LayerGradients& lg = grads.layers[idx];

    Matrix dz = std::move(dpost);
    if (layer.activation == Activation::kReLU) {
      for (std::size_t k = 0; k < dz.data.size(); ++k) {
        if (preact[idx].data[k] <= 0.0) dz.data[k] = 0.0;
      }
    }

    Matrix dw_eff = matmul(transpose(dz), inputs[idx]);  // out x in
    lg.bias.assign(layer.out_dim(), 0.0);
    if (!layer.base_frozen) {
      for (std::size_t r = 0; r < dz.rows; ++r)
        for (std::size_t c = 0; c < dz.cols; ++c) lg.bias[c] += dz(r, c);
    }

    if (layer.lowrank) {
      // Chain through the factor values used in the forward pass; rounding is
      // treated as identity so latent factors receive the full gradient.
      const bool simulate = layer.quant_simulated && layer.quant_bits.has_value();
      Matrix u = layer.lowrank->u;
      Matrix v = layer.lowrank->v;
      if (simulate) {
        u.data = quantize_uniform(std::move(u.data), *layer.quant_bits);
        v.data = quantize_uniform(std::move(v.data), *layer.quant_bits);
      }
      lg.lowrank_u = matmul(dw_eff, transpose(v));
      lg.lowrank_v = matmul(transpose(u), dw_eff);
      lg.weights = Matrix(layer.out_dim(), layer.in_dim(), 0.0);
    } else if (layer.base_frozen) {
      lg.weights = Matrix(layer.out_dim(), layer.in_dim(), 0.0);
    } else {
      lg.weights = hadamard(dw_eff, layer.mask);
    }

    if (layer.adapter) {
      const bool simulate = layer.quant_simulated && layer.quant_bits.has_value();
      Matrix a = layer.adapter->a;
      Matrix b = layer.adapter->b;
      if (simulate) {
        a.data = quantize_uniform(std::move(a.data), *layer.quant_bits);
        b.data = quantize_uniform(std::move(b.data), *layer.quant_bits);
      }
      lg.adapter_b = matmul(dw_eff, transpose(a));
      lg.adapter_a = matmul(transpose(b), dw_eff);
    }

    if (idx > 0) dpost = matmul(dz, eff[idx]);
  }
  return grads;
}

Gradients backward(const Model& model, const Matrix& batch, const std::vector<int>& labels,
                   LossKind kind) {
  if (batch.rows != labels.size()) {
    throw StructuralError("backward: batch rows differ from label count");
  }
  check_labels(model, labels);
  const Matrix logits = forward(model, batch);
  return backward_from_logit_grad(model, batch, loss_logit_grad(logits, labels, kind));
}

namespace {

void axpy(Matrix& p, const Matrix& g, double lr, const char* what) {
  if (!same_shape(p, g)) throw StructuralError(std::string(what) + ": gradient shape mismatch");
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * g.data[i];
}

}  // namespace

Model sgd_step(Model model, const Gradients& grads, double lr) {
  if (lr < 0.0) throw DomainError("sgd_step: negative learning rate");
  if (grads.layers.size() != model.layers.size()) {
    throw StructuralError("sgd_step: gradient layer count mismatch");
  }
  if (lr == 0.0) return model;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    DenseLayer& layer = model.layers[i];
    const LayerGradients& lg = grads.layers[i];
    if (layer.lowrank) {
      axpy(layer.lowrank->u, lg.lowrank_u, lr, "lowrank u");
      axpy(layer.lowrank->v, lg.lowrank_v, lr, "lowrank v");
    } else if (!layer.base_frozen) {
      axpy(layer.weights, lg.weights, lr, "weights");
      // Masked-out weights have zero gradient already; keep their stored value
      // untouched by construction.
    }
    if (!layer.base_frozen) {
      if (lg.bias.size() != layer.bias.size()) {
        throw StructuralError("sgd_step: bias gradient length mismatch");
      }
      for (std::size_t j = 0; j < layer.bias.size(); ++j) layer.bias[j] -= lr * lg.bias[j];
    }
    if (layer.adapter) {
      axpy(layer.adapter->a, lg.adapter_a, lr, "adapter a");
      axpy(layer.adapter->b, lg.adapter_b, lr, "adapter b");
    }
  }
  return model;
}

std::vector<double> softmax_temp(const std::vector<double>& logits, double temperature) {
  if (temperature <= 0.0) throw DomainError("softmax_temp: temperature must be positive");
  if (logits.empty()) throw DomainError("softmax_temp: empty logits");
  double mx = logits[0] / temperature;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] / temperature;
    mx = std::max(mx, out[i]);
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

double kl_div(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw StructuralError("kl_div: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i] * (std::log(p[i]) - std::log(std::max(q[i], 1e-12)));
  }
  return acc;
}

Model train_sgd(Model model, const Dataset& train, const TrainOptions& opts) {
  if (opts.epochs < 0) throw DomainError("train_sgd: negative epoch count");
  if (opts.lr < 0.0) throw DomainError("train_sgd: negative learning rate");
  if (opts.batch_size < 1) throw DomainError("train_sgd: batch size must be >= 1");
  if (opts.epochs == 0) return model;
  if (train.size() == 0) throw DomainError("train_sgd: empty training set");

  const bool any_quant = std::any_of(model.layers.begin(), model.layers.end(),
                                     [](const DenseLayer& l) { return l.quant_bits.has_value(); });
  if (any_quant) {
    for (DenseLayer& l : model.layers) {
      if (l.quant_bits) l.quant_simulated = true;
    }
  }

  const std::size_t n = train.size();
  const std::size_t bs = static_cast<std::size_t>(opts.batch_size);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      Matrix bx(stop - start, train.inputs.cols);
      std::vector<int> by(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        for (std::size_t j = 0; j < train.inputs.cols; ++j) bx(i - start, j) = train.inputs(i, j);
        by[i - start] = train.labels[i];
      }
      Gradients g = backward(model, bx, by, opts.loss);
      model = sgd_step(std::move(model), g, opts.lr);
    }
  }

  // Restore structural contracts the optimizer loosened: quantized layers land
  // back on their grid, shared layers back on a codebook of the same size.
  // Frozen dense weights never moved and stay bit-identical, so only the
  // matrices that can drift are re-snapped.
  for (DenseLayer& l : model.layers) {
    if (l.quant_bits) {
      if (l.base_frozen && !l.lowrank) {
        if (l.adapter) {
          l.adapter->a.data = quantize_uniform(std::move(l.adapter->a.data), *l.quant_bits);
          l.adapter->b.data = quantize_uniform(std::move(l.adapter->b.data), *l.quant_bits);
        }
      } else {
        requantize_inplace(l);
      }
      l.quant_simulated = false;
    }
    if (l.shared_clusters) {
      apply_weight_sharing(l, *l.shared_clusters);
    }
  }
  return model;
}

}  // namespace slimkit

#include "slimkit/model.hpp"

#include <cmath>
#include <string>

#include "slimkit/errors.hpp"
#include "slimkit/quantization.hpp"
#include "slimkit/rng.hpp"

namespace slimkit {

std::size_t DenseLayer::alive_count() const {
  std::size_t n = 0;
  for (double v : mask.data) {
    if (v != 0.0) ++n;
  }
  return n;
}

Matrix effective_weights(const DenseLayer& layer) {
  const bool simulate = layer.quant_simulated && layer.quant_bits.has_value();
  Matrix base;
  if (layer.lowrank) {
    Matrix u = layer.lowrank->u;
    Matrix v = layer.lowrank->v;
    if (simulate) {
      u.data = quantize_uniform(std::move(u.data), *layer.quant_bits);
      v.data = quantize_uniform(std::move(v.data), *layer.quant_bits);
    }
    base = matmul(u, v);
  } else {
    base = simulate ? quantize_masked(layer.weights, layer.mask, *layer.quant_bits)
                    : hadamard(layer.weights, layer.mask);
  }
  if (layer.adapter) {
    Matrix a = layer.adapter->a;
    Matrix b = layer.adapter->b;
    if (simulate) {
      a.data = quantize_uniform(std::move(a.data), *layer.quant_bits);
      b.data = quantize_uniform(std::move(b.data), *layer.quant_bits);
    }
    base = add(base, matmul(b, a));
  }
  return base;
}

void Model::validate() const {
  if (layers.empty()) {
    if (input_dim != output_dim) {
      throw StructuralError("model: zero layers but input_dim != output_dim");
    }
    return;
  }
  std::size_t expect = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    const std::string where = "layer " + std::to_string(i);
    if (l.in_dim() != expect) {
      throw StructuralError(where + ": input dim " + std::to_string(l.in_dim()) +
                            " breaks the chain (expected " + std::to_string(expect) + ")");
    }
    if (!same_shape(l.weights, l.mask)) {
      throw StructuralError(where + ": mask shape differs from weights");
    }
    for (double v : l.mask.data) {
      if (v != 0.0 && v != 1.0) throw StructuralError(where + ": mask entry not in {0,1}");
    }
    if (l.bias.size() != l.out_dim()) {
      throw StructuralError(where + ": bias length differs from out dim");
    }
    if (l.lowrank) {
      if (l.lowrank->u.rows != l.out_dim() || l.lowrank->v.cols != l.in_dim() ||
          l.lowrank->u.cols != l.lowrank->v.rows) {
        throw StructuralError(where + ": low-rank factor shapes inconsistent");
      }
    }
    if (l.adapter) {
      if (l.adapter->b.rows != l.out_dim() || l.adapter->a.cols != l.in_dim() ||
          l.adapter->b.cols != l.adapter->a.rows) {
        throw StructuralError(where + ": adapter shapes inconsistent");
      }
    }
    if (l.quant_bits && !valid_bitwidth(*l.quant_bits)) {
      throw StructuralError(where + ": quant_bits outside {1,2,4,8,16,32}");
    }
    expect = l.out_dim();
  }
  if (expect != output_dim) {
    throw StructuralError("model: last layer out dim differs from output_dim");
  }
}

namespace {

DenseLayer seeded_layer(std::size_t in, std::size_t out, Activation act,
                        std::mt19937_64& rng) {
  DenseLayer layer;
  layer.weights = Matrix(out, in);
  layer.mask = Matrix(out, in, 1.0);
  layer.bias.assign(out, 0.0);
  layer.activation = act;
  const double s = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-s, s);
  for (double& w : layer.weights.data) w = dist(rng);
  return layer;
}

}  // namespace

Model make_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                 std::size_t output_dim, std::uint64_t seed,
                 Activation output_activation) {
  if (input_dim == 0 || output_dim == 0) {
    throw DomainError("make_model: zero input or output dim");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw DomainError("make_model: zero-width hidden layer");
  }
  Model m;
  m.input_dim = input_dim;
  m.output_dim = output_dim;
  auto rng = make_rng(seed);
  std::size_t prev = input_dim;
  for (std::size_t h : hidden) {
    m.layers.push_back(seeded_layer(prev, h, Activation::kReLU, rng));
    prev = h;
  }
  m.layers.push_back(seeded_layer(prev, output_dim, output_activation, rng));
  m.validate();
  return m;
}

Matrix forward(const Model& model, const Matrix& batch) {
  if (batch.cols != model.input_dim) {
    throw StructuralError("forward: batch has " + std::to_string(batch.cols) +
                          " columns, model expects " + std::to_string(model.input_dim));
  }
  Matrix x = batch;
  for (const DenseLayer& layer : model.layers) {
    const Matrix w = effective_weights(layer);
    Matrix z = matmul(x, transpose(w));
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
    if (layer.activation == Activation::kReLU) {
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(z);
  }
  require_finite(x, "forward");
  return x;
}

namespace {

bool vectors_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

bool matrices_equal(const Matrix& a, const Matrix& b) {
  return same_shape(a, b) && vectors_equal(a.data, b.data);
}

}  // namespace

bool models_equal(const Model& a, const Model& b) {
  if (a.input_dim != b.input_dim || a.output_dim != b.output_dim ||
      a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const DenseLayer& x = a.layers[i];
    const DenseLayer& y = b.layers[i];
    if (!matrices_equal(x.weights, y.weights) || !matrices_equal(x.mask, y.mask) ||
        !vectors_equal(x.bias, y.bias) || x.activation != y.activation ||
        x.quant_bits != y.quant_bits || x.quant_simulated != y.quant_simulated ||
        x.base_frozen != y.base_frozen || x.shared_clusters != y.shared_clusters) {
      return false;
    }
    if (x.lowrank.has_value() != y.lowrank.has_value()) return false;
    if (x.lowrank && (!matrices_equal(x.lowrank->u, y.lowrank->u) ||
                      !matrices_equal(x.lowrank->v, y.lowrank->v))) {
      return false;
    }
    if (x.adapter.has_value() != y.adapter.has_value()) return false;
    if (x.adapter && (!matrices_equal(x.adapter->a, y.adapter->a) ||
                      !matrices_equal(x.adapter->b, y.adapter->b))) {
      return false;
    }
  }
  return true;
}

}  // namespace slimkit

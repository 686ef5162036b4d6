#include "slimkit/arch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slimkit/errors.hpp"
#include "slimkit/rng.hpp"
#include "slimkit/svd.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

namespace {

const DenseLayer& layer_at(const Model& model, std::size_t index, const char* what) {
  if (index >= model.layers.size()) {
    throw DomainError(std::string(what) + ": layer index " + std::to_string(index) +
                      " out of range");
  }
  return model.layers[index];
}

}  // namespace

Model lowrank_factorize(const Model& model, std::size_t layer_index, std::size_t rank) {
  const DenseLayer& target = layer_at(model, layer_index, "lowrank_factorize");
  const std::size_t max_rank = std::min(target.out_dim(), target.in_dim());
  if (rank < 1 || rank > max_rank) {
    throw DomainError("lowrank_factorize: rank " + std::to_string(rank) +
                      " outside [1, " + std::to_string(max_rank) + "]");
  }
  Model out = model;
  DenseLayer& layer = out.layers[layer_index];
  // Factor whatever currently feeds the forward pass, so re-factorizing an
  // already factorized layer shrinks it further.
  const Matrix base = layer.lowrank ? matmul(layer.lowrank->u, layer.lowrank->v)
                                    : hadamard(layer.weights, layer.mask);
  const SvdResult s = svd(base);
  Matrix u(base.rows, rank), v(rank, base.cols);
  for (std::size_t j = 0; j < rank; ++j) {
    for (std::size_t i = 0; i < base.rows; ++i) u(i, j) = s.u(i, j) * s.singular_values[j];
    for (std::size_t c = 0; c < base.cols; ++c) v(j, c) = s.v(c, j);
  }
  layer.lowrank = LowRankFactors{std::move(u), std::move(v)};
  layer.quant_bits.reset();  // factors are fresh 64-bit values
  layer.quant_simulated = false;
  layer.shared_clusters.reset();
  return out;
}

Model inject_adapter(const Model& model, std::size_t layer_index, std::size_t rank,
                     std::uint64_t seed) {
  const DenseLayer& target = layer_at(model, layer_index, "inject_adapter");
  const std::size_t max_rank = std::min(target.out_dim(), target.in_dim());
  if (rank < 1 || rank > max_rank) {
    throw DomainError("inject_adapter: rank " + std::to_string(rank) + " outside [1, " +
                      std::to_string(max_rank) + "]");
  }
  Model out = model;
  DenseLayer& layer = out.layers[layer_index];
  Matrix a(rank, layer.in_dim());
  const double s = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + rank));
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(-s, s);
  for (double& w : a.data) w = dist(rng);
  layer.adapter = AdapterPair{std::move(a), Matrix(layer.out_dim(), rank, 0.0)};
  layer.base_frozen = true;
  return out;
}

Model resize(const Model& model, std::size_t depth, std::size_t width, std::uint64_t seed) {
  if (depth < 1 || width < 1) throw DomainError("resize: depth and width must be >= 1");
  const Activation out_act =
      model.layers.empty() ? Activation::kSoftmaxOutput : model.layers.back().activation;
  return make_model(model.input_dim, std::vector<std::size_t>(depth, width),
                    model.output_dim, seed, out_act);
}

Kmeans1d kmeans_1d(const std::vector<double>& values, std::size_t k) {
  if (values.empty()) throw DomainError("kmeans_1d: empty input");
  if (k < 1 || k > values.size()) {
    throw DomainError("kmeans_1d: k outside [1, " + std::to_string(values.size()) + "]");
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  Kmeans1d result;
  result.centers.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto pos = static_cast<std::size_t>(
        (static_cast<double>(c) + 0.5) / static_cast<double>(k) *
        static_cast<double>(sorted.size()));
    result.centers[c] = sorted[std::min(pos, sorted.size() - 1)];
  }

  result.assignment.assign(values.size(), 0);
  for (int iter = 0; iter < 20; ++iter) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::fabs(values[i] - result.centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = std::fabs(values[i] - result.centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      result.assignment[i] = static_cast<int>(best);
    }
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[static_cast<std::size_t>(result.assignment[i])] += values[i];
      ++count[static_cast<std::size_t>(result.assignment[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) result.centers[c] = sum[c] / static_cast<double>(count[c]);
    }
  }
  return result;
}

void apply_weight_sharing(DenseLayer& layer, std::size_t clusters) {
  std::vector<double> alive;
  alive.reserve(layer.weights.data.size());
  for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
    if (layer.mask.data[i] != 0.0) alive.push_back(layer.weights.data[i]);
  }
  if (alive.empty()) throw DomainError("weight_share: layer has no alive weights");
  if (clusters < 1 || clusters > alive.size()) {
    throw DomainError("weight_share: clusters outside [1, " + std::to_string(alive.size()) + "]");
  }
  const Kmeans1d km = kmeans_1d(alive, clusters);
  std::size_t k = 0;
  for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
    if (layer.mask.data[i] != 0.0) {
      layer.weights.data[i] = km.centers[static_cast<std::size_t>(km.assignment[k++])];
    }
  }
  layer.shared_clusters = clusters;
}

Model weight_share(const Model& model, std::size_t layer_index, std::size_t clusters) {
  const DenseLayer& target = layer_at(model, layer_index, "weight_share");
  if (target.factorized()) {
    throw DomainError("weight_share: layer's dense path was replaced by low-rank factors");
  }
  Model out = model;
  apply_weight_sharing(out.layers[layer_index], clusters);
  return out;
}

Model peft_finetune(const Model& model, const Dataset& train, int epochs, double lr,
                    int batch_size) {
  const bool trainable =
      std::any_of(model.layers.begin(), model.layers.end(), [](const DenseLayer& l) {
        return l.adapter.has_value() || l.lowrank.has_value() || !l.base_frozen;
      });
  if (!trainable) throw ConfigError("peft_finetune: model has no trainable component");
  TrainOptions opts;
  opts.epochs = epochs;
  opts.lr = lr;
  opts.batch_size = batch_size;
  return train_sgd(model, train, opts);
}

}  // namespace slimkit

#include "slimkit/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "slimkit/errors.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

std::size_t prune_count(double fraction, std::size_t alive) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(alive) + 1e-9));
}

namespace {

void check_fraction(double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw DomainError("prune: fraction " + std::to_string(fraction) + " outside [0,1]");
  }
}

}  // namespace

std::vector<Matrix> importance_scores(const Model& model, const PruneCriterion& criterion,
                                      const Dataset* calib) {
  std::vector<Matrix> scores(model.layers.size());
  if (criterion.kind == PruneKind::kMagnitude) {
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      const DenseLayer& layer = model.layers[i];
      if (layer.factorized()) continue;
      Matrix s = hadamard(layer.weights, layer.mask);
      for (double& v : s.data) v = std::fabs(v);
      scores[i] = std::move(s);
    }
    return scores;
  }
  if (calib == nullptr || calib->size() == 0) {
    throw DomainError("importance_scores: gradient criterion needs a calibration batch");
  }
  const Gradients grads =
      backward(model, calib->inputs, calib->labels, LossKind::kCrossEntropy);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const DenseLayer& layer = model.layers[i];
    if (layer.factorized()) continue;
    Matrix s = hadamard(layer.weights, layer.mask);
    for (std::size_t k = 0; k < s.data.size(); ++k) {
      s.data[k] = std::fabs(s.data[k] * grads.layers[i].weights.data[k]);
    }
    scores[i] = std::move(s);
  }
  return scores;
}

std::vector<std::vector<double>> unit_importance_scores(const Model& model,
                                                        const PruneCriterion& criterion,
                                                        const Dataset* calib) {
  const std::vector<Matrix> weight_scores = importance_scores(model, criterion, calib);
  std::vector<std::vector<double>> unit_scores;
  if (model.layers.size() < 2) return unit_scores;
  for (std::size_t li = 0; li + 1 < model.layers.size(); ++li) {
    const std::size_t units = model.layers[li].out_dim();
    std::vector<double> s(units, 0.0);
    if (weight_scores[li].size() > 0) {
      for (std::size_t u = 0; u < units; ++u)
        for (std::size_t c = 0; c < model.layers[li].in_dim(); ++c)
          s[u] += weight_scores[li](u, c);
    }
    if (weight_scores[li + 1].size() > 0) {
      for (std::size_t r = 0; r < model.layers[li + 1].out_dim(); ++r)
        for (std::size_t u = 0; u < units; ++u) s[u] += weight_scores[li + 1](r, u);
    }
    unit_scores.push_back(std::move(s));
  }
  return unit_scores;
}

Model prune_unstructured(const Model& model, double fraction, const PruneCriterion& criterion,
                         const Dataset* calib) {
  check_fraction(fraction);
  const std::vector<Matrix> scores = importance_scores(model, criterion, calib);
  Model out = model;

  if (criterion.scope == PruneScope::kPerLayer) {
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
      DenseLayer& layer = out.layers[li];
      if (layer.factorized()) continue;
      std::vector<std::size_t> alive;
      for (std::size_t k = 0; k < layer.mask.data.size(); ++k) {
        if (layer.mask.data[k] != 0.0) alive.push_back(k);
      }
      const std::size_t kill = prune_count(fraction, alive.size());
      std::stable_sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
        return scores[li].data[a] < scores[li].data[b];
      });
      for (std::size_t k = 0; k < kill; ++k) layer.mask.data[alive[k]] = 0.0;
    }
    return out;
  }

  // Global scope: pool every alive weight across prunable layers.
  std::vector<std::pair<std::size_t, std::size_t>> alive;  // (layer, flat index)
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    const DenseLayer& layer = out.layers[li];
    if (layer.factorized()) continue;
    for (std::size_t k = 0; k < layer.mask.data.size(); ++k) {
      if (layer.mask.data[k] != 0.0) alive.emplace_back(li, k);
    }
  }
  const std::size_t kill = prune_count(fraction, alive.size());
  std::stable_sort(alive.begin(), alive.end(), [&](const auto& a, const auto& b) {
    const double sa = scores[a.first].data[a.second];
    const double sb = scores[b.first].data[b.second];
    return std::tie(sa, a.first, a.second) < std::tie(sb, b.first, b.second);
  });
  for (std::size_t k = 0; k < kill; ++k) {
    out.layers[alive[k].first].mask.data[alive[k].second] = 0.0;
  }
  return out;
}

namespace {

Matrix drop_rows(const Matrix& m, const std::vector<bool>& keep) {
  std::size_t kept = 0;
  for (bool k : keep) kept += k ? 1 : 0;
  Matrix out(kept, m.cols);
  std::size_t r = 0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (!keep[i]) continue;
    for (std::size_t j = 0; j < m.cols; ++j) out(r, j) = m(i, j);
    ++r;
  }
  return out;
}

Matrix drop_cols(const Matrix& m, const std::vector<bool>& keep) {
  std::size_t kept = 0;
  for (bool k : keep) kept += k ? 1 : 0;
  Matrix out(m.rows, kept);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (keep[j]) out(i, c++) = m(i, j);
    }
  }
  return out;
}

}  // namespace

Model prune_structured(const Model& model, double fraction, const PruneCriterion& criterion,
                       const Dataset* calib) {
  check_fraction(fraction);
  if (model.layers.size() < 2) {
    throw DomainError("prune_structured: model has no hidden layer");
  }
  const std::vector<std::vector<double>> unit_scores =
      unit_importance_scores(model, criterion, calib);
  Model out = model;

  for (std::size_t li = 0; li + 1 < out.layers.size(); ++li) {
    const std::size_t units = out.layers[li].out_dim();
    std::size_t kill = prune_count(fraction, units);
    if (kill >= units) kill = units - 1;  // clipped: a hidden layer keeps >= 1 unit
    if (kill == 0) continue;

    std::vector<std::size_t> order(units);
    for (std::size_t u = 0; u < units; ++u) order[u] = u;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return unit_scores[li][a] < unit_scores[li][b];
    });
    std::vector<bool> keep(units, true);
    for (std::size_t k = 0; k < kill; ++k) keep[order[k]] = false;

    DenseLayer& layer = out.layers[li];
    layer.weights = drop_rows(layer.weights, keep);
    layer.mask = drop_rows(layer.mask, keep);
    std::vector<double> bias;
    for (std::size_t u = 0; u < units; ++u) {
      if (keep[u]) bias.push_back(layer.bias[u]);
    }
    layer.bias = std::move(bias);
    if (layer.lowrank) layer.lowrank->u = drop_rows(layer.lowrank->u, keep);
    if (layer.adapter) layer.adapter->b = drop_rows(layer.adapter->b, keep);

    DenseLayer& next = out.layers[li + 1];
    next.weights = drop_cols(next.weights, keep);
    next.mask = drop_cols(next.mask, keep);
    if (next.lowrank) next.lowrank->v = drop_cols(next.lowrank->v, keep);
    if (next.adapter) next.adapter->a = drop_cols(next.adapter->a, keep);
  }
  out.validate();
  return out;
}

}  // namespace slimkit

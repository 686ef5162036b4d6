#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "slimkit/model.hpp"
#include "slimkit/policy.hpp"
#include "slimkit/rng.hpp"
#include "slimkit/train.hpp"

namespace slimkit::testing {

// Small random model for property tests: 2-4 layers, dims in [2, max_dim].
inline Model random_model(std::mt19937_64& rng, std::size_t max_dim = 8,
                          std::size_t max_hidden_layers = 2) {
  std::uniform_int_distribution<std::size_t> dim(2, max_dim);
  std::uniform_int_distribution<std::size_t> depth(1, max_hidden_layers);
  std::vector<std::size_t> hidden;
  const std::size_t layers = depth(rng);
  for (std::size_t i = 0; i < layers; ++i) hidden.push_back(dim(rng));
  return make_model(dim(rng), hidden, dim(rng), rng());
}

inline Dataset random_dataset(std::mt19937_64& rng, const Model& model, std::size_t n,
                              Split split = Split::kTrain) {
  Dataset d;
  d.split = split;
  d.inputs = Matrix(n, model.input_dim);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (double& v : d.inputs.data) v = unit(rng);
  std::uniform_int_distribution<int> label(0, static_cast<int>(model.output_dim) - 1);
  d.labels.resize(n);
  for (int& y : d.labels) y = label(rng);
  return d;
}

// True when some ReLU pre-activation sits within `margin` of its kink, where
// central differences stop approximating the one-sided derivative.
inline bool near_relu_kink(const Model& model, const Matrix& batch, double margin = 1e-3) {
  Matrix x = batch;
  for (const DenseLayer& layer : model.layers) {
    Matrix z = matmul(x, transpose(effective_weights(layer)));
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
    if (layer.activation == Activation::kReLU) {
      for (double v : z.data) {
        if (std::fabs(v) < margin) return true;
      }
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(z);
  }
  return false;
}

// Central finite differences against an arbitrary scalar objective, the
// independent oracle for every analytic gradient in the suite.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double eps = 1e-5) {
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

// |a - b| / max(1, |a|, |b|): relative for large gradients, absolute near zero
// where finite differences carry rounding noise.
inline double grad_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

// Runs fd_check over every parameter of every layer: mutates the parameter,
// re-evaluates `objective`, and compares the central difference against the
// matching entry of `grads`. Returns the worst grad_error seen.
inline double max_gradient_error(Model model, const Gradients& grads,
                                 const std::function<double(const Model&)>& objective) {
  double worst = 0.0;
  auto check_matrix = [&](Matrix& param, const Matrix& grad) {
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      const double saved = param.data[i];
      const double fd = central_diff(
          [&](double x) {
            param.data[i] = x;
            return objective(model);
          },
          saved);
      param.data[i] = saved;
      worst = std::max(worst, grad_error(grad.data[i], fd));
    }
  };
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    DenseLayer& layer = model.layers[li];
    const LayerGradients& lg = grads.layers[li];
    if (layer.lowrank) {
      check_matrix(layer.lowrank->u, lg.lowrank_u);
      check_matrix(layer.lowrank->v, lg.lowrank_v);
    } else if (!layer.base_frozen) {
      check_matrix(layer.weights, lg.weights);
    }
    if (!layer.base_frozen) {
      for (std::size_t j = 0; j < layer.bias.size(); ++j) {
        const double saved = layer.bias[j];
        const double fd = central_diff(
            [&](double x) {
              layer.bias[j] = x;
              return objective(model);
            },
            saved);
        layer.bias[j] = saved;
        worst = std::max(worst, grad_error(lg.bias[j], fd));
      }
    }
    if (layer.adapter) {
      check_matrix(layer.adapter->a, lg.adapter_a);
      check_matrix(layer.adapter->b, lg.adapter_b);
    }
  }
  return worst;
}

// Exhaustive argmax of dQ/dC over the grid, written independently of the
// production selection (collect every candidate, then scan with the documented
// tie-break: score, larger cost drop, knob id, smaller value).
inline std::optional<Selection> oracle_greedy_argmax(const Model& model,
                                                     const MeterReading& current,
                                                     const Instantiation& inst,
                                                     const CandidateGrid& grid,
                                                     const MeterEvaluator& meters) {
  struct Entry {
    Selection sel;
    double score = 0.0;
    double drop = 0.0;
  };
  std::vector<Entry> entries;
  for (const auto& [knob_id, values] : grid.values) {
    const Knob* knob = inst.find_knob(knob_id);
    const Rule& rule = get_rule(knob_id, inst.rules);
    for (const KnobValue& v : values) {
      MeterReading after;
      try {
        after = meters.measure(apply_rule(rule, model, *knob, v));
      } catch (const Error&) {
        continue;
      }
      const double drop = current.cost - after.cost;
      if (drop <= 0.0) continue;
      entries.push_back({Selection{knob_id, v}, (after.quality - current.quality) / drop, drop});
    }
  }
  if (entries.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const Entry& a = entries[i];
    const Entry& b = entries[best];
    bool wins = false;
    if (a.score > b.score) {
      wins = true;
    } else if (a.score == b.score) {
      if (a.drop > b.drop) {
        wins = true;
      } else if (a.drop == b.drop) {
        if (a.sel.knob_id < b.sel.knob_id) {
          wins = true;
        } else if (a.sel.knob_id == b.sel.knob_id &&
                   knob_value_less(a.sel.value, b.sel.value)) {
          wins = true;
        }
      }
    }
    if (wins) best = i;
  }
  return entries[best].sel;
}

}  // namespace slimkit::testing

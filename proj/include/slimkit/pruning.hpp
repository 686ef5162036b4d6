#pragma once

#include <vector>

#include "slimkit/model.hpp"

namespace slimkit {

enum class PruneKind { kMagnitude, kGradientMagnitude };
enum class PruneScope { kGlobal, kPerLayer };

struct PruneCriterion {
  PruneKind kind = PruneKind::kMagnitude;
  PruneScope scope = PruneScope::kPerLayer;
};

// Per-weight importance, one matrix per layer (factorized layers get an empty
// matrix; their dense weights are provenance only). Magnitude scores |w| of
// the effective weights; GradientMagnitude scores |w * dL/dw| on the
// calibration batch and requires nonempty calib data (DomainError otherwise).
std::vector<Matrix> importance_scores(const Model& model, const PruneCriterion& criterion,
                                      const Dataset* calib);

// Importance of each hidden unit: the summed scores of its incoming row plus
// its outgoing column in the next layer. One vector per hidden layer.
std::vector<std::vector<double>> unit_importance_scores(const Model& model,
                                                        const PruneCriterion& criterion,
                                                        const Dataset* calib);

// Masks floor(fraction * alive) additional weights with the lowest scores.
// PerLayer scope applies the floor per layer, Global pools all layers. Ties
// break on the lowest flat index (Global: lowest layer first). Masked weights
// are never resurrected; fraction 0 and 1 are both legal.
Model prune_unstructured(const Model& model, double fraction, const PruneCriterion& criterion,
                         const Dataset* calib = nullptr);

// Removes floor(fraction * units) lowest-scoring hidden units per hidden layer,
// physically deleting the unit's row and the next layer's matching column (and
// the matching slices of any factor/adapter matrices). Output layer units are
// never removed; a removal that would empty a layer is clipped to leave one
// unit.
Model prune_structured(const Model& model, double fraction, const PruneCriterion& criterion,
                       const Dataset* calib = nullptr);

// floor with a 1e-9 nudge so exact rational products like (1/3)*12 do not lose
// a unit to floating-point representation.
std::size_t prune_count(double fraction, std::size_t alive);

}  // namespace slimkit

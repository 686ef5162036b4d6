#pragma once

#include <vector>

#include "slimkit/matrix.hpp"

namespace slimkit {

// Thin SVD a = u * diag(s) * v^T with singular values sorted descending.
// u is rows x k, v is cols x k with k = min(rows, cols).
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v;
};

// One-sided Jacobi, adequate for the <= 64x64 matrices this toolkit handles.
SvdResult svd(const Matrix& a);

// u[:, :rank] * diag(s[:rank]) * v[:, :rank]^T
Matrix svd_reconstruct(const SvdResult& s, std::size_t rank);

}  // namespace slimkit

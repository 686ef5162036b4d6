#include "slimkit/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slimkit/errors.hpp"

namespace slimkit {

namespace {

// One-sided Jacobi on the columns of b (rows >= cols). Accumulates the right
// rotations into v; on exit the columns of b are orthogonal.
void jacobi_orthogonalize(Matrix& b, Matrix& v) {
  const std::size_t n = b.cols;
  const double tol = 1e-14;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < b.rows; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          alpha += bp * bp;
          beta += bq * bq;
          gamma += bp * bq;
        }
        if (gamma == 0.0 || std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < b.rows; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          b(i, p) = c * bp - s * bq;
          b(i, q) = s * bp + c * bq;
        }
        for (std::size_t i = 0; i < v.rows; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (a.rows == 0 || a.cols == 0) throw DomainError("svd: empty matrix");
  if (a.rows < a.cols) {
    // Work on the transpose and swap the factor roles.
    SvdResult t = svd(transpose(a));
    return SvdResult{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
  }

  Matrix b = a;
  Matrix v = Matrix::identity(a.cols);
  jacobi_orthogonalize(b, v);

  const std::size_t k = a.cols;
  std::vector<double> sigma(k, 0.0);
  Matrix u(a.rows, k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) norm += b(i, j) * b(i, j);
    norm = std::sqrt(norm);
    sigma[j] = norm;
    if (norm > 0.0) {
      for (std::size_t i = 0; i < a.rows; ++i) u(i, j) = b(i, j) / norm;
    }
    // A numerically zero column leaves a zero column in u; it contributes
    // nothing to any reconstruction.
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdResult out;
  out.u = Matrix(a.rows, k);
  out.v = Matrix(a.cols, k);
  out.singular_values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    out.singular_values[j] = sigma[src];
    for (std::size_t i = 0; i < a.rows; ++i) out.u(i, j) = u(i, src);
    for (std::size_t i = 0; i < a.cols; ++i) out.v(i, j) = v(i, src);
  }
  return out;
}

Matrix svd_reconstruct(const SvdResult& s, std::size_t rank) {
  rank = std::min(rank, s.singular_values.size());
  Matrix out(s.u.rows, s.v.rows, 0.0);
  for (std::size_t j = 0; j < rank; ++j) {
    const double sv = s.singular_values[j];
    if (sv == 0.0) continue;
    for (std::size_t i = 0; i < s.u.rows; ++i) {
      const double uis = s.u(i, j) * sv;
      if (uis == 0.0) continue;
      for (std::size_t c = 0; c < s.v.rows; ++c) out(i, c) += uis * s.v(c, j);
    }
  }
  return out;
}

}  // namespace slimkit

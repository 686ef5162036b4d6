#pragma once

#include <cstddef>
#include <vector>

namespace slimkit {

// Dense row-major matrix of 64-bit reals. The whole toolkit runs on doubles;
// reduced precision is modelled by value snapping plus cost-meter bookkeeping,
// never by changing the storage type.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows * cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }

  static Matrix identity(std::size_t n);
};

bool same_shape(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

// Throws StructuralError when a contains NaN/Inf; `what` names the producer.
void require_finite(const Matrix& m, const char* what);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);

double frobenius_norm(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace slimkit

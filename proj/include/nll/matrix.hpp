#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nll {

/// Dense row-major matrix of doubles. Small enough on purpose: every model
/// in this toolkit fits in a handful of these.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  std::span<double> row(int i) { return {a.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int i) const {
    return {a.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }

  std::size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }

  void fill(double v) { a.assign(a.size(), v); }
};

/// C = A * B. Throws ShapeError on inner-dimension mismatch.
Matrix matmul(const Matrix& A, const Matrix& B);
/// C = A^T * B.
Matrix matmul_tn(const Matrix& A, const Matrix& B);
/// C = A * B^T.
Matrix matmul_nt(const Matrix& A, const Matrix& B);

Matrix transpose(const Matrix& A);

/// Y += v broadcast over rows (v.size() == Y.cols).
void add_row_vector(Matrix& Y, std::span<const double> v);

std::vector<double> column_sums(const Matrix& A);

bool all_finite(const Matrix& A);
bool all_finite(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Scale v to unit L2 norm in place. A numerically zero vector is replaced
/// by the first basis vector so downstream cosine math stays defined.
void l2_normalize(std::span<double> v);

}  // namespace nll

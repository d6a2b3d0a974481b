#include "nll/matrix.hpp"

#include <cmath>
#include <string>

#include "nll/errors.hpp"

namespace nll {

Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols != B.rows) {
    throw ShapeError("matmul: " + std::to_string(A.rows) + "x" + std::to_string(A.cols) +
                     " * " + std::to_string(B.rows) + "x" + std::to_string(B.cols));
  }
  Matrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = A.a.data() + static_cast<std::size_t>(i) * A.cols;
    double* crow = C.a.data() + static_cast<std::size_t>(i) * C.cols;
    for (int k = 0; k < A.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = B.a.data() + static_cast<std::size_t>(k) * B.cols;
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return C;
}

Matrix matmul_tn(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows) throw ShapeError("matmul_tn: row counts differ");
  Matrix C(A.cols, B.cols);
  for (int k = 0; k < A.rows; ++k) {
    const double* arow = A.a.data() + static_cast<std::size_t>(k) * A.cols;
    const double* brow = B.a.data() + static_cast<std::size_t>(k) * B.cols;
    for (int i = 0; i < A.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = C.a.data() + static_cast<std::size_t>(i) * C.cols;
      for (int j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return C;
}

Matrix matmul_nt(const Matrix& A, const Matrix& B) {
  if (A.cols != B.cols) throw ShapeError("matmul_nt: col counts differ");
  Matrix C(A.rows, B.rows);
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = A.a.data() + static_cast<std::size_t>(i) * A.cols;
    double* crow = C.a.data() + static_cast<std::size_t>(i) * C.cols;
    for (int j = 0; j < B.rows; ++j) {
      const double* brow = B.a.data() + static_cast<std::size_t>(j) * B.cols;
      double s = 0.0;
      for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
      crow[j] = s;
    }
  }
  return C;
}

Matrix transpose(const Matrix& A) {
  Matrix T(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
  return T;
}

void add_row_vector(Matrix& Y, std::span<const double> v) {
  if (static_cast<int>(v.size()) != Y.cols) throw ShapeError("add_row_vector: length mismatch");
  for (int i = 0; i < Y.rows; ++i) {
    double* yrow = Y.a.data() + static_cast<std::size_t>(i) * Y.cols;
    for (int j = 0; j < Y.cols; ++j) yrow[j] += v[j];
  }
}

std::vector<double> column_sums(const Matrix& A) {
  std::vector<double> s(A.cols, 0.0);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) s[j] += A(i, j);
  return s;
}

bool all_finite(const Matrix& A) { return all_finite(std::span<const double>(A.a)); }

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void l2_normalize(std::span<double> v) {
  const double n = l2_norm(v);
  if (n < 1e-12) {
    for (auto& x : v) x = 0.0;
    if (!v.empty()) v[0] = 1.0;
    return;
  }
  for (auto& x : v) x /= n;
}

}  // namespace nll

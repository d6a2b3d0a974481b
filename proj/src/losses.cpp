#include "nll/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nll/errors.hpp"

namespace nll {

namespace {

double log_sum_exp(std::span<const double> z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix P(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    auto p = softmax(logits.row(i));
    std::copy(p.begin(), p.end(), P.row(i).begin());
  }
  return P;
}

double softmax_cross_entropy(std::span<const double> logits, int target) {
  if (target < 0 || target >= static_cast<int>(logits.size())) {
    throw ValidationError("cross_entropy: target class " + std::to_string(target) +
                          " out of range");
  }
  const double lse = log_sum_exp(logits);
  // log p clamped at log(PROB_FLOOR)
  const double logp = std::max(logits[target] - lse, std::log(PROB_FLOOR));
  return -logp;
}

double softmax_cross_entropy(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) throw ShapeError("cross_entropy: length mismatch");
  require_distribution(target, "cross_entropy target");
  const double lse = log_sum_exp(logits);
  double loss = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (target[c] == 0.0) continue;
    const double logp = std::max(logits[c] - lse, std::log(PROB_FLOOR));
    loss -= target[c] * logp;
  }
  return std::max(loss, 0.0);
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse_loss: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero-norm vector");
  return dot(a, b) / (na * nb);
}

void require_distribution(std::span<const double> p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    if (v < -1e-9) throw ValidationError(std::string(what) + ": negative probability");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-6) {
    throw ValidationError(std::string(what) + ": probabilities sum to " + std::to_string(s));
  }
}

double ce_batch_with_grad(const Matrix& logits, std::span<const int> labels, Matrix& dlogits) {
  if (static_cast<int>(labels.size()) != logits.rows) {
    throw ShapeError("ce_batch: label count mismatch");
  }
  dlogits = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  const double inv_b = 1.0 / logits.rows;
  for (int i = 0; i < logits.rows; ++i) {
    total += softmax_cross_entropy(logits.row(i), labels[i]);
    auto p = softmax(logits.row(i));
    auto g = dlogits.row(i);
    for (int c = 0; c < logits.cols; ++c) g[c] = p[c] * inv_b;
    g[labels[i]] -= inv_b;
  }
  return total * inv_b;
}

double ce_batch_with_grad(const Matrix& logits, const Matrix& targets, Matrix& dlogits) {
  if (targets.rows != logits.rows || targets.cols != logits.cols) {
    throw ShapeError("ce_batch: target shape mismatch");
  }
  dlogits = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  const double inv_b = 1.0 / logits.rows;
  for (int i = 0; i < logits.rows; ++i) {
    total += softmax_cross_entropy(logits.row(i), targets.row(i));
    auto p = softmax(logits.row(i));
    auto g = dlogits.row(i);
    auto t = targets.row(i);
    for (int c = 0; c < logits.cols; ++c) g[c] = (p[c] - t[c]) * inv_b;
  }
  return total * inv_b;
}

double softmax_mse_batch_with_grad(const Matrix& logits, const Matrix& targets, Matrix& dlogits) {
  if (targets.rows != logits.rows || targets.cols != logits.cols) {
    throw ShapeError("softmax_mse_batch: target shape mismatch");
  }
  dlogits = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  const int C = logits.cols;
  const double inv_b = 1.0 / logits.rows;
  for (int i = 0; i < logits.rows; ++i) {
    auto p = softmax(logits.row(i));
    auto t = targets.row(i);
    total += mse_loss(p, t);
    // dL/dz_k = (2/C) * p_k * ((p_k - t_k) - sum_c (p_c - t_c) p_c)
    double inner = 0.0;
    for (int c = 0; c < C; ++c) inner += (p[c] - t[c]) * p[c];
    auto g = dlogits.row(i);
    for (int k = 0; k < C; ++k) {
      g[k] = (2.0 / C) * p[k] * ((p[k] - t[k]) - inner) * inv_b;
    }
  }
  return total * inv_b;
}

}  // namespace nll

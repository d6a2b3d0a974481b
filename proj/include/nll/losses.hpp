#pragma once

#include <span>
#include <vector>

#include "nll/matrix.hpp"

namespace nll {

/// Probabilities are clamped to [PROB_FLOOR, 1] before any log.
inline constexpr double PROB_FLOOR = 1e-12;

/// Numerically stable softmax (shifted by the max logit).
std::vector<double> softmax(std::span<const double> logits);

/// Row-wise softmax of a logit matrix.
Matrix softmax_rows(const Matrix& logits);

/// Cross-entropy of softmax(logits) against a hard class index.
double softmax_cross_entropy(std::span<const double> logits, int target);

/// Cross-entropy against a probability vector. The target must be a valid
/// distribution (sum 1 within 1e-6, entries >= 0) or ValidationError.
double softmax_cross_entropy(std::span<const double> logits, std::span<const double> target);

/// Mean of squared componentwise differences.
double mse_loss(std::span<const double> pred, std::span<const double> target);

/// a.b / (|a||b|); throws DomainError on a zero-norm argument.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Throws ValidationError unless p is a probability vector (tolerance 1e-6).
void require_distribution(std::span<const double> p, const char* what);

// --- batch losses with logit gradients (used by the training loops) ---

/// Mean CE over rows of `logits` against hard labels; writes dL/dlogits.
double ce_batch_with_grad(const Matrix& logits, std::span<const int> labels, Matrix& dlogits);

/// Mean CE over rows against soft target rows; writes dL/dlogits.
double ce_batch_with_grad(const Matrix& logits, const Matrix& targets, Matrix& dlogits);

/// Mean over rows of mse_loss(softmax(logits_row), target_row); writes
/// dL/dlogits through the softmax Jacobian.
double softmax_mse_batch_with_grad(const Matrix& logits, const Matrix& targets, Matrix& dlogits);

}  // namespace nll

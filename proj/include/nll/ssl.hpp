#pragma once

#include <span>
#include <vector>

#include "nll/nn.hpp"

namespace nll {

/// Semi-supervised training knobs. Sharpening and mixup can be disabled for
/// the minimal-objective ablation.
struct SslConfig {
  double lambda_mse = 1.0;   // unlabeled-loss weight
  int ramp_epochs = 10;      // linear ramp-up of lambda_mse
  double temperature = 0.5;  // sharpening temperature T
  double alpha = 4.0;        // mixup Beta(alpha, alpha) concentration
  double jitter_sigma = 0.1; // augmentation scale, in units of per-feature std
  bool mixup = true;
  bool sharpen = true;

  void validate() const;  // T > 0, alpha > 0, lambda_mse >= 0, sigma >= 0
};

/// x + Gaussian jitter of scale sigma per coordinate.
std::vector<double> augment(std::span<const double> x, double sigma, Rng& rng);
/// Per-coordinate jitter scales.
std::vector<double> augment(std::span<const double> x, std::span<const double> sigma, Rng& rng);

/// p_c^(1/T), renormalized. T = 1 is the identity; T -> 0 approaches the
/// one-hot argmax.
std::vector<double> sharpen(std::span<const double> p, double temperature);

/// Mean softmax prediction over two augmented copies of x, sharpened.
std::vector<double> pseudo_label(const Mlp& extractor, const Mlp& classifier,
                                 std::span<const double> x, std::span<const double> sigma,
                                 double temperature, Rng& rng);

/// w*given + (1-w)*predicted, sharpened. Both inputs must be distributions.
std::vector<double> refine_label(std::span<const double> given, std::span<const double> predicted,
                                 double weight, double temperature);

/// One mixup draw: lambda ~ Beta(alpha, alpha), lambda' = max(lambda,
/// 1-lambda); convex-combines inputs and label distributions.
struct MixedExample {
  std::vector<double> input;
  std::vector<double> target;
  double lambda_prime = 1.0;
};
MixedExample mixup(std::span<const double> x1, std::span<const double> p1,
                   std::span<const double> x2, std::span<const double> p2, double alpha,
                   Rng& rng);

/// A fully materialized SSL minibatch: inputs and target distributions are
/// constants by the time the loss sees them.
struct SslBatch {
  Matrix labeled_inputs;
  Matrix labeled_targets;
  Matrix unlabeled_inputs;
  Matrix unlabeled_targets;
  std::vector<double> refine_weights;  // provenance: the w used per labeled row
};

/// Labeled entries carry refined labels (given one-hot mixed with the
/// two-copy average prediction, weight per sample), unlabeled entries carry
/// sharpened pseudo-labels; both sides then go through mixup against a
/// shuffled pool of all entries.
SslBatch build_ssl_batch(const Mlp& extractor, const Mlp& classifier, const Matrix& labeled_x,
                         std::span<const int> labeled_y, std::span<const double> label_weights,
                         int class_count, const Matrix& unlabeled_x,
                         std::span<const double> sigma, const SslConfig& cfg, Rng& rng);

/// L_CE over labeled + lambda_mse_effective * L_MSE over unlabeled, with
/// analytic gradients for the extractor and classifier.
double ssl_loss(const Mlp& extractor, const Mlp& classifier, const SslBatch& batch,
                double lambda_mse_effective, GradientBundle* f_grads = nullptr,
                GradientBundle* g_grads = nullptr);

}  // namespace nll

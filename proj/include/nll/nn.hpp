#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nll/matrix.hpp"
#include "nll/rng.hpp"

namespace nll {

struct LinearLayer {
  Matrix W;               // in x out
  std::vector<double> b;  // out
};

/// Fixed-architecture multi-layer perceptron. Hidden layers use a leaky
/// rectifier (slope `leak`); the last layer is linear. A single-layer Mlp
/// is a plain affine map, which is how the linear classifier is modelled.
struct Mlp {
  std::vector<LinearLayer> layers;
  double leak = 0.01;

  int in_dim() const { return layers.empty() ? 0 : layers.front().W.rows; }
  int out_dim() const { return layers.empty() ? 0 : layers.back().W.cols; }

  /// Fan-in-scaled uniform init: W ~ U(-1/sqrt(in), 1/sqrt(in)), b = 0.
  static Mlp make(std::span<const int> dims, Rng& rng, double leak = 0.01);
};

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer (post.back() == output)
  bool valid() const { return !pre.empty(); }
};

/// Per-parameter gradients, shape-congruent with the network.
struct GradientBundle {
  std::vector<Matrix> dW;
  std::vector<std::vector<double>> db;

  static GradientBundle zeros_like(const Mlp& net);
  void accumulate(const GradientBundle& other, double scale = 1.0);
  void scale(double s);
  bool all_finite() const;
};

/// Forward pass; batch columns must equal the input dimension (ShapeError).
Matrix forward(const Mlp& net, const Matrix& batch);
/// Forward pass that records activations for a later backward().
Matrix forward(const Mlp& net, const Matrix& batch, ForwardCache& cache);

/// Exact analytic gradients given dL/d(output). Returns dL/d(input).
/// Throws UsageError if the cache was not produced by a forward pass of a
/// congruent batch through this network.
Matrix backward(const Mlp& net, const ForwardCache& cache, const Matrix& dout,
                GradientBundle& grads);

/// SGD-with-momentum state: velocity buffers mirror the parameters.
struct OptimizerState {
  double lr = 0.05;
  double momentum = 0.9;
  std::vector<Matrix> vW;
  std::vector<std::vector<double>> vb;

  static OptimizerState make(const Mlp& net, double lr, double momentum);
};

/// v <- momentum*v + g;  p <- p - lr*v
void sgd_step(Mlp& net, const GradientBundle& grads, OptimizerState& state);

// --- flat parameter views (gradient checks, hashing, checkpoints) ---

std::size_t param_count(const Mlp& net);
std::vector<double> flatten_params(const Mlp& net);
void load_params(Mlp& net, std::span<const double> flat);
std::vector<double> flatten_grads(const GradientBundle& g);

/// FNV-1a over the raw parameter bytes; bitwise change detector.
std::uint64_t param_hash(const Mlp& net);

}  // namespace nll

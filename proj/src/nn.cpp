#include "nll/nn.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "nll/errors.hpp"

namespace nll {

Mlp Mlp::make(std::span<const int> dims, Rng& rng, double leak) {
  if (dims.size() < 2) throw ValidationError("Mlp::make: need at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw ValidationError("Mlp::make: non-positive layer dim");
  Mlp net;
  net.leak = leak;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LinearLayer layer;
    layer.W = Matrix(dims[l], dims[l + 1]);
    layer.b.assign(dims[l + 1], 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (auto& w : layer.W.a) w = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

GradientBundle GradientBundle::zeros_like(const Mlp& net) {
  GradientBundle g;
  for (const auto& layer : net.layers) {
    g.dW.emplace_back(layer.W.rows, layer.W.cols);
    g.db.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

void GradientBundle::accumulate(const GradientBundle& other, double s) {
  if (other.dW.size() != dW.size()) throw ShapeError("GradientBundle: layer count mismatch");
  for (std::size_t l = 0; l < dW.size(); ++l) {
    if (other.dW[l].size() != dW[l].size() || other.db[l].size() != db[l].size()) {
      throw ShapeError("GradientBundle: layer shape mismatch");
    }
    for (std::size_t i = 0; i < dW[l].a.size(); ++i) dW[l].a[i] += s * other.dW[l].a[i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += s * other.db[l][i];
  }
}

void GradientBundle::scale(double s) {
  for (auto& m : dW)
    for (auto& v : m.a) v *= s;
  for (auto& b : db)
    for (auto& v : b) v *= s;
}

bool GradientBundle::all_finite() const {
  for (const auto& m : dW)
    if (!nll::all_finite(m)) return false;
  for (const auto& b : db)
    if (!nll::all_finite(std::span<const double>(b))) return false;
  return true;
}

namespace {

void check_input(const Mlp& net, const Matrix& batch) {
  if (net.layers.empty()) throw UsageError("forward: empty network");
  if (batch.cols != net.in_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols) +
                     " columns, network expects " + std::to_string(net.in_dim()));
  }
}

}  // namespace

Matrix forward(const Mlp& net, const Matrix& batch) {
  ForwardCache cache;
  return forward(net, batch, cache);
}

Matrix forward(const Mlp& net, const Matrix& batch, ForwardCache& cache) {
  check_input(net, batch);
  cache.input = batch;
  cache.pre.clear();
  cache.post.clear();
  Matrix x = batch;
  const std::size_t L = net.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    Matrix z = matmul(x, net.layers[l].W);
    add_row_vector(z, net.layers[l].b);
    cache.pre.push_back(z);
    if (l + 1 < L) {
      for (auto& v : z.a) v = (v > 0.0) ? v : net.leak * v;
    }
    cache.post.push_back(z);
    x = std::move(z);
  }
  return x;
}

Matrix backward(const Mlp& net, const ForwardCache& cache, const Matrix& dout,
                GradientBundle& grads) {
  if (!cache.valid() || cache.pre.size() != net.layers.size()) {
    throw UsageError("backward: no forward pass recorded for this network");
  }
  if (dout.rows != cache.input.rows || dout.cols != net.out_dim()) {
    throw ShapeError("backward: upstream gradient shape mismatch");
  }
  grads = GradientBundle::zeros_like(net);
  Matrix delta = dout;
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    if (l + 1 < static_cast<int>(net.layers.size())) {
      // through the leaky rectifier of this layer's output
      const Matrix& z = cache.pre[l];
      for (std::size_t i = 0; i < delta.a.size(); ++i) {
        delta.a[i] *= (z.a[i] > 0.0) ? 1.0 : net.leak;
      }
    }
    const Matrix& a_in = (l == 0) ? cache.input : cache.post[l - 1];
    grads.dW[l] = matmul_tn(a_in, delta);
    grads.db[l] = column_sums(delta);
    if (l > 0) delta = matmul_nt(delta, net.layers[l].W);
  }
  return matmul_nt(delta, net.layers[0].W);
}

OptimizerState OptimizerState::make(const Mlp& net, double lr, double momentum) {
  OptimizerState s;
  s.lr = lr;
  s.momentum = momentum;
  for (const auto& layer : net.layers) {
    s.vW.emplace_back(layer.W.rows, layer.W.cols);
    s.vb.emplace_back(layer.b.size(), 0.0);
  }
  return s;
}

void sgd_step(Mlp& net, const GradientBundle& grads, OptimizerState& state) {
  if (grads.dW.size() != net.layers.size() || state.vW.size() != net.layers.size()) {
    throw ShapeError("sgd_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    if (grads.dW[l].rows != layer.W.rows || grads.dW[l].cols != layer.W.cols ||
        grads.db[l].size() != layer.b.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < layer.W.a.size(); ++i) {
      state.vW[l].a[i] = state.momentum * state.vW[l].a[i] + grads.dW[l].a[i];
      layer.W.a[i] -= state.lr * state.vW[l].a[i];
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      state.vb[l][i] = state.momentum * state.vb[l][i] + grads.db[l][i];
      layer.b[i] -= state.lr * state.vb[l][i];
    }
  }
}

std::size_t param_count(const Mlp& net) {
  std::size_t n = 0;
  for (const auto& layer : net.layers) n += layer.W.a.size() + layer.b.size();
  return n;
}

std::vector<double> flatten_params(const Mlp& net) {
  std::vector<double> flat;
  flat.reserve(param_count(net));
  for (const auto& layer : net.layers) {
    flat.insert(flat.end(), layer.W.a.begin(), layer.W.a.end());
    flat.insert(flat.end(), layer.b.begin(), layer.b.end());
  }
  return flat;
}

void load_params(Mlp& net, std::span<const double> flat) {
  if (flat.size() != param_count(net)) throw ShapeError("load_params: size mismatch");
  std::size_t k = 0;
  for (auto& layer : net.layers) {
    for (auto& w : layer.W.a) w = flat[k++];
    for (auto& b : layer.b) b = flat[k++];
  }
}

std::vector<double> flatten_grads(const GradientBundle& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    flat.insert(flat.end(), g.dW[l].a.begin(), g.dW[l].a.end());
    flat.insert(flat.end(), g.db[l].begin(), g.db[l].end());
  }
  return flat;
}

std::uint64_t param_hash(const Mlp& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& layer : net.layers) {
    mix(layer.W.a.data(), layer.W.a.size() * sizeof(double));
    mix(layer.b.data(), layer.b.size() * sizeof(double));
  }
  return h;
}

}  // namespace nll

#include "nll/ssl.hpp"

#include <algorithm>
#include <cmath>

#include "nll/errors.hpp"
#include "nll/losses.hpp"

namespace nll {

void SslConfig::validate() const {
  if (temperature <= 0.0) throw ValidationError("ssl: temperature must be > 0");
  if (alpha <= 0.0) throw ValidationError("ssl: alpha must be > 0");
  if (lambda_mse < 0.0) throw ValidationError("ssl: lambda_mse must be >= 0");
  if (jitter_sigma < 0.0) throw ValidationError("ssl: jitter_sigma must be >= 0");
  if (ramp_epochs < 0) throw ValidationError("ssl: ramp_epochs must be >= 0");
}

std::vector<double> augment(std::span<const double> x, double sigma, Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (sigma == 0.0) return out;
  for (auto& v : out) v += rng.normal(0.0, sigma);
  return out;
}

std::vector<double> augment(std::span<const double> x, std::span<const double> sigma, Rng& rng) {
  if (x.size() != sigma.size()) throw ShapeError("augment: sigma length mismatch");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (sigma[i] > 0.0) out[i] += rng.normal(0.0, sigma[i]);
  }
  return out;
}

std::vector<double> sharpen(std::span<const double> p, double temperature) {
  if (temperature <= 0.0) throw ValidationError("sharpen: temperature must be > 0");
  if (temperature == 1.0) return {p.begin(), p.end()};
  // work in log space so tiny temperatures stay finite
  std::vector<double> logs(p.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < p.size(); ++c) {
    logs[c] = std::log(std::clamp(p[c], PROB_FLOOR, 1.0)) / temperature;
    max_log = std::max(max_log, logs[c]);
  }
  std::vector<double> out(p.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    out[c] = std::exp(logs[c] - max_log);
    sum += out[c];
  }
  for (auto& v : out) v /= sum;
  return out;
}

namespace {

std::vector<double> predict_row(const Mlp& extractor, const Mlp& classifier,
                                std::span<const double> x) {
  Matrix batch(1, static_cast<int>(x.size()));
  std::copy(x.begin(), x.end(), batch.row(0).begin());
  const Matrix logits = forward(classifier, forward(extractor, batch));
  return softmax(logits.row(0));
}

}  // namespace

std::vector<double> pseudo_label(const Mlp& extractor, const Mlp& classifier,
                                 std::span<const double> x, std::span<const double> sigma,
                                 double temperature, Rng& rng) {
  const auto x1 = augment(x, sigma, rng);
  const auto x2 = augment(x, sigma, rng);
  const auto p1 = predict_row(extractor, classifier, x1);
  const auto p2 = predict_row(extractor, classifier, x2);
  std::vector<double> mean(p1.size());
  for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = 0.5 * (p1[c] + p2[c]);
  return sharpen(mean, temperature);
}

std::vector<double> refine_label(std::span<const double> given, std::span<const double> predicted,
                                 double weight, double temperature) {
  if (weight < 0.0 || weight > 1.0) throw ValidationError("refine_label: weight must be in [0,1]");
  if (given.size() != predicted.size()) throw ShapeError("refine_label: length mismatch");
  require_distribution(given, "refine_label given");
  require_distribution(predicted, "refine_label predicted");
  std::vector<double> mixed(given.size());
  for (std::size_t c = 0; c < mixed.size(); ++c) {
    mixed[c] = weight * given[c] + (1.0 - weight) * predicted[c];
  }
  return sharpen(mixed, temperature);
}

MixedExample mixup(std::span<const double> x1, std::span<const double> p1,
                   std::span<const double> x2, std::span<const double> p2, double alpha,
                   Rng& rng) {
  if (alpha <= 0.0) throw ValidationError("mixup: alpha must be > 0");
  if (x1.size() != x2.size() || p1.size() != p2.size()) throw ShapeError("mixup: size mismatch");
  const double lambda = rng.beta(alpha, alpha);
  const double lp = std::max(lambda, 1.0 - lambda);  // stay closer to the first element
  MixedExample out;
  out.lambda_prime = lp;
  out.input.resize(x1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) out.input[i] = lp * x1[i] + (1.0 - lp) * x2[i];
  out.target.resize(p1.size());
  for (std::size_t c = 0; c < p1.size(); ++c) out.target[c] = lp * p1[c] + (1.0 - lp) * p2[c];
  return out;
}

SslBatch build_ssl_batch(const Mlp& extractor, const Mlp& classifier, const Matrix& labeled_x,
                         std::span<const int> labeled_y, std::span<const double> label_weights,
                         int class_count, const Matrix& unlabeled_x,
                         std::span<const double> sigma, const SslConfig& cfg, Rng& rng) {
  cfg.validate();
  const int nl = labeled_x.rows;
  const int nu = unlabeled_x.rows;
  if (static_cast<int>(labeled_y.size()) != nl || static_cast<int>(label_weights.size()) != nl) {
    throw ShapeError("build_ssl_batch: labeled metadata mismatch");
  }
  SslBatch batch;
  batch.refine_weights.assign(label_weights.begin(), label_weights.end());

  // labeled side: first augmented copy becomes the input, the refined label
  // mixes the given one-hot with the two-copy average prediction
  batch.labeled_inputs = Matrix(nl, labeled_x.cols);
  batch.labeled_targets = Matrix(nl, class_count);
  for (int i = 0; i < nl; ++i) {
    const auto x1 = augment(labeled_x.row(i), sigma, rng);
    const auto x2 = augment(labeled_x.row(i), sigma, rng);
    const auto p1 = predict_row(extractor, classifier, x1);
    const auto p2 = predict_row(extractor, classifier, x2);
    std::vector<double> mean(p1.size());
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = 0.5 * (p1[c] + p2[c]);
    std::vector<double> given(class_count, 0.0);
    given[labeled_y[i]] = 1.0;
    const auto refined =
        refine_label(given, mean, label_weights[i], cfg.sharpen ? cfg.temperature : 1.0);
    std::copy(x1.begin(), x1.end(), batch.labeled_inputs.row(i).begin());
    std::copy(refined.begin(), refined.end(), batch.labeled_targets.row(i).begin());
  }

  // unlabeled side: the first copy is trained on, both feed the pseudo-label
  batch.unlabeled_inputs = Matrix(nu, unlabeled_x.cols);
  batch.unlabeled_targets = Matrix(nu, class_count);
  for (int i = 0; i < nu; ++i) {
    const auto x1 = augment(unlabeled_x.row(i), sigma, rng);
    const auto x2 = augment(unlabeled_x.row(i), sigma, rng);
    const auto p1 = predict_row(extractor, classifier, x1);
    const auto p2 = predict_row(extractor, classifier, x2);
    std::vector<double> mean(p1.size());
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = 0.5 * (p1[c] + p2[c]);
    const auto q = sharpen(mean, cfg.sharpen ? cfg.temperature : 1.0);
    std::copy(x1.begin(), x1.end(), batch.unlabeled_inputs.row(i).begin());
    std::copy(q.begin(), q.end(), batch.unlabeled_targets.row(i).begin());
  }

  if (!cfg.mixup || nl + nu < 2) return batch;

  // mixup against a shuffled pool of every entry in the batch
  auto pool = rng.permutation(static_cast<std::size_t>(nl + nu));
  auto entry_input = [&](std::size_t k) {
    return k < static_cast<std::size_t>(nl)
               ? batch.labeled_inputs.row(static_cast<int>(k))
               : batch.unlabeled_inputs.row(static_cast<int>(k) - nl);
  };
  auto entry_target = [&](std::size_t k) {
    return k < static_cast<std::size_t>(nl)
               ? batch.labeled_targets.row(static_cast<int>(k))
               : batch.unlabeled_targets.row(static_cast<int>(k) - nl);
  };

  Matrix mixed_lx(nl, labeled_x.cols), mixed_lt(nl, class_count);
  Matrix mixed_ux(nu, unlabeled_x.cols), mixed_ut(nu, class_count);
  for (int i = 0; i < nl + nu; ++i) {
    const std::size_t partner = pool[i];
    const auto self_x = entry_input(static_cast<std::size_t>(i));
    const auto self_t = entry_target(static_cast<std::size_t>(i));
    const auto m = mixup(self_x, self_t, entry_input(partner), entry_target(partner), cfg.alpha,
                         rng);
    if (i < nl) {
      std::copy(m.input.begin(), m.input.end(), mixed_lx.row(i).begin());
      std::copy(m.target.begin(), m.target.end(), mixed_lt.row(i).begin());
    } else {
      std::copy(m.input.begin(), m.input.end(), mixed_ux.row(i - nl).begin());
      std::copy(m.target.begin(), m.target.end(), mixed_ut.row(i - nl).begin());
    }
  }
  batch.labeled_inputs = std::move(mixed_lx);
  batch.labeled_targets = std::move(mixed_lt);
  batch.unlabeled_inputs = std::move(mixed_ux);
  batch.unlabeled_targets = std::move(mixed_ut);
  return batch;
}

double ssl_loss(const Mlp& extractor, const Mlp& classifier, const SslBatch& batch,
                double lambda_mse_effective, GradientBundle* f_grads, GradientBundle* g_grads) {
  if (lambda_mse_effective < 0.0) throw ValidationError("ssl_loss: lambda_mse must be >= 0");
  const bool want_grads = f_grads || g_grads;
  GradientBundle f_acc, g_acc;
  bool grads_started = false;
  double loss = 0.0;

  auto run_side = [&](const Matrix& inputs, const Matrix& targets, bool mse, double scale) {
    if (inputs.rows == 0 || scale == 0.0) return;
    ForwardCache f_cache, g_cache;
    const Matrix features = forward(extractor, inputs, f_cache);
    const Matrix logits = forward(classifier, features, g_cache);
    Matrix dlogits;
    const double value = mse ? softmax_mse_batch_with_grad(logits, targets, dlogits)
                             : ce_batch_with_grad(logits, targets, dlogits);
    loss += scale * value;
    if (!want_grads) return;
    for (auto& v : dlogits.a) v *= scale;
    GradientBundle g_bundle;
    const Matrix dfeatures = backward(classifier, g_cache, dlogits, g_bundle);
    GradientBundle f_bundle;
    backward(extractor, f_cache, dfeatures, f_bundle);
    if (!grads_started) {
      f_acc = std::move(f_bundle);
      g_acc = std::move(g_bundle);
      grads_started = true;
    } else {
      f_acc.accumulate(f_bundle);
      g_acc.accumulate(g_bundle);
    }
  };

  run_side(batch.labeled_inputs, batch.labeled_targets, false, 1.0);
  run_side(batch.unlabeled_inputs, batch.unlabeled_targets, true, lambda_mse_effective);

  if (want_grads) {
    if (!grads_started) {
      f_acc = GradientBundle::zeros_like(extractor);
      g_acc = GradientBundle::zeros_like(classifier);
    }
    if (f_grads) *f_grads = std::move(f_acc);
    if (g_grads) *g_grads = std::move(g_acc);
  }
  return loss;
}

}  // namespace nll

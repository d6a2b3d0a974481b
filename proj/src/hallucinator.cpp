#include "nll/hallucinator.hpp"

#include <algorithm>
#include <cmath>

#include "nll/container.hpp"
#include "nll/errors.hpp"
#include "nll/losses.hpp"

namespace nll {

FeatureSet embed_features(const Mlp& extractor, const Dataset& ds,
                          const std::vector<int>& indices, const std::string& role) {
  FeatureSet set;
  set.role = role;
  set.source_indices = indices;
  set.labels.reserve(indices.size());
  Matrix batch(static_cast<int>(indices.size()), ds.input_dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int i = indices[k];
    std::copy(ds.inputs.row(i).begin(), ds.inputs.row(i).end(),
              batch.row(static_cast<int>(k)).begin());
    set.labels.push_back(ds.noisy_labels[i]);
  }
  set.features = forward(extractor, batch);
  for (int r = 0; r < set.features.rows; ++r) l2_normalize(set.features.row(r));
  return set;
}

std::vector<std::pair<int, int>> sample_pairs(const FeatureSet& easy, int anchors_per_sample,
                                              Rng& rng) {
  if (anchors_per_sample < 1) throw ValidationError("sample_pairs: anchors_per_sample >= 1");
  const int n = easy.size();
  const auto& labels = easy.labels;
  std::vector<int> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    throw ValidationError("sample_pairs: easy set contains a single class");
  }

  // per label, the rows NOT carrying it, in row order
  std::vector<std::vector<int>> eligible_for;
  eligible_for.reserve(distinct.size());
  for (int y : distinct) {
    std::vector<int> rows;
    for (int v = 0; v < n; ++v) {
      if (labels[v] != y) rows.push_back(v);
    }
    eligible_for.push_back(std::move(rows));
  }
  auto label_slot = [&](int y) {
    return static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), y) -
                                    distinct.begin());
  };

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * anchors_per_sample);
  for (int u = 0; u < n; ++u) {
    const auto& eligible = eligible_for[label_slot(labels[u])];
    for (int a = 0; a < anchors_per_sample; ++a) {
      pairs.emplace_back(u, eligible[rng.index(eligible.size())]);
    }
  }
  return pairs;
}

std::vector<double> hallucinate_raw(const Mlp& h, std::span<const double> u,
                                    std::span<const double> v) {
  if (static_cast<int>(u.size() + v.size()) != h.in_dim()) {
    throw ShapeError("hallucinate: concatenated pair does not match hallucinator input");
  }
  Matrix x(1, h.in_dim());
  std::copy(u.begin(), u.end(), x.row(0).begin());
  std::copy(v.begin(), v.end(), x.row(0).begin() + u.size());
  Matrix y = forward(h, x);
  return {y.row(0).begin(), y.row(0).end()};
}

std::vector<double> hallucinate(const Mlp& h, std::span<const double> u,
                                std::span<const double> v) {
  auto out = hallucinate_raw(h, u, v);
  l2_normalize(out);
  return out;
}

double similarity_loss(std::span<const double> anchor, std::span<const double> u,
                       std::span<const double> v, double lambda_p) {
  if (lambda_p < 0.5 || lambda_p > 1.0) {
    throw ValidationError("similarity_loss: lambda_p must be in [0.5, 1.0]");
  }
  return -lambda_p * cosine_similarity(anchor, u) -
         (1.0 - lambda_p) * cosine_similarity(anchor, v);
}

double hallucination_loss(const Mlp& h, const Mlp& classifier, std::span<const double> u,
                          std::span<const double> v, int label_u, double lambda_p) {
  const auto anchor = hallucinate(h, u, v);
  const double sim = similarity_loss(anchor, u, v, lambda_p);
  Matrix s(1, static_cast<int>(anchor.size()));
  std::copy(anchor.begin(), anchor.end(), s.row(0).begin());
  const Matrix logits = forward(classifier, s);
  return sim + softmax_cross_entropy(logits.row(0), label_u);
}

double hallucination_batch_loss(const Mlp& h, const Mlp& classifier, const FeatureSet& easy,
                                std::span<const std::pair<int, int>> pairs, double lambda_p,
                                GradientBundle* h_grads, GradientBundle* g_grads) {
  if (lambda_p < 0.5 || lambda_p > 1.0) {
    throw ValidationError("hallucination_batch_loss: lambda_p must be in [0.5, 1.0]");
  }
  const int B = static_cast<int>(pairs.size());
  if (B == 0) throw ValidationError("hallucination_batch_loss: empty pair batch");
  const int d = easy.dim();

  Matrix x(B, 2 * d);
  std::vector<int> labels(B);
  for (int i = 0; i < B; ++i) {
    const auto [u, v] = pairs[i];
    auto dst = x.row(i);
    std::copy(easy.features.row(u).begin(), easy.features.row(u).end(), dst.begin());
    std::copy(easy.features.row(v).begin(), easy.features.row(v).end(), dst.begin() + d);
    labels[i] = easy.labels[u];
  }

  ForwardCache h_cache;
  Matrix raw = forward(h, x, h_cache);  // B x d, pre-normalization
  std::vector<double> norms(B);
  Matrix anchors = raw;
  for (int i = 0; i < B; ++i) {
    norms[i] = l2_norm(raw.row(i));
    l2_normalize(anchors.row(i));
  }

  // similarity term; rows of easy.features are unit so cos == dot
  double sim_total = 0.0;
  Matrix danchor(B, d);
  for (int i = 0; i < B; ++i) {
    const auto [u, v] = pairs[i];
    auto su = easy.features.row(u);
    auto sv = easy.features.row(v);
    auto sa = anchors.row(i);
    sim_total += -lambda_p * dot(sa, su) - (1.0 - lambda_p) * dot(sa, sv);
    auto g = danchor.row(i);
    for (int j = 0; j < d; ++j) {
      g[j] = (-lambda_p * su[j] - (1.0 - lambda_p) * sv[j]) / B;
    }
  }

  // classification term on the normalized anchors
  ForwardCache g_cache;
  Matrix logits = forward(classifier, anchors, g_cache);
  Matrix dlogits;
  const double ce_mean = ce_batch_with_grad(logits, labels, dlogits);
  GradientBundle g_bundle;
  Matrix danchor_ce = backward(classifier, g_cache, dlogits, g_bundle);
  if (g_grads) *g_grads = std::move(g_bundle);

  const double loss = sim_total / B + ce_mean;
  if (!h_grads) return loss;

  for (std::size_t i = 0; i < danchor.a.size(); ++i) danchor.a[i] += danchor_ce.a[i];
  // through row-wise normalization: dz = (g - a (a.g)) / ||z||
  Matrix draw(B, d);
  for (int i = 0; i < B; ++i) {
    auto a = anchors.row(i);
    auto g = danchor.row(i);
    const double ag = dot(std::span<const double>(a), std::span<const double>(g));
    auto dz = draw.row(i);
    for (int j = 0; j < d; ++j) dz[j] = (g[j] - a[j] * ag) / norms[i];
  }
  GradientBundle h_bundle;
  backward(h, h_cache, draw, h_bundle);
  *h_grads = std::move(h_bundle);
  return loss;
}

AnchorSet make_anchors(const Mlp& h, const FeatureSet& easy,
                       std::span<const std::pair<int, int>> pairs, double lambda_p) {
  const int d = easy.dim();
  AnchorSet set;
  set.lambda_p = lambda_p;
  set.target_labels.reserve(pairs.size());
  set.provenance.assign(pairs.begin(), pairs.end());

  Matrix x(static_cast<int>(pairs.size()), 2 * d);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [u, v] = pairs[i];
    auto dst = x.row(static_cast<int>(i));
    std::copy(easy.features.row(u).begin(), easy.features.row(u).end(), dst.begin());
    std::copy(easy.features.row(v).begin(), easy.features.row(v).end(), dst.begin() + d);
    set.target_labels.push_back(easy.labels[u]);
  }
  set.anchors = forward(h, x);
  for (int r = 0; r < set.anchors.rows; ++r) l2_normalize(set.anchors.row(r));
  return set;
}

std::vector<double> train_hallucinator(Mlp& h, const Mlp& classifier, const FeatureSet& easy,
                                       const HallTrainConfig& cfg, Rng& rng) {
  if (easy.size() == 0) throw ValidationError("train_hallucinator: empty easy set");
  auto pairs = sample_pairs(easy, cfg.anchors_per_sample, rng);
  OptimizerState opt = OptimizerState::make(h, cfg.lr, cfg.momentum);

  std::vector<double> curve;
  curve.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(pairs);
    double total = 0.0;
    const int n = static_cast<int>(pairs.size());
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      std::span<const std::pair<int, int>> batch(pairs.data() + start, b);
      GradientBundle h_grads;
      const double loss =
          hallucination_batch_loss(h, classifier, easy, batch, cfg.lambda_p, &h_grads);
      total += loss * b;
      sgd_step(h, h_grads, opt);
    }
    curve.push_back(total / n);
  }
  return curve;
}

void export_anchors(const std::string& path, const AnchorSet& anchors, const FeatureSet& easy) {
  Container c;
  c.meta["kind"] = "anchors";
  c.meta["n"] = anchors.size();
  c.meta["dim"] = anchors.anchors.cols;
  c.meta["lambda_p"] = anchors.lambda_p;
  c.arrays.push_back(NamedArray::from_matrix("anchors", anchors.anchors, "f32"));
  c.arrays.push_back(NamedArray::from_ints("target_labels", anchors.target_labels));
  std::vector<int> src_u, src_v;
  for (const auto& [u, v] : anchors.provenance) {
    src_u.push_back(easy.source_indices[u]);
    src_v.push_back(easy.source_indices[v]);
  }
  c.arrays.push_back(NamedArray::from_ints("source_u", src_u));
  c.arrays.push_back(NamedArray::from_ints("source_v", src_v));
  save_container(path, c);
}

}  // namespace nll

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nll/data.hpp"
#include "nll/nn.hpp"

namespace nll {

/// Embedded samples with provenance. Rows are L2-normalized d-vectors.
struct FeatureSet {
  Matrix features;
  std::vector<int> source_indices;  // dataset sample ids
  std::vector<int> labels;          // noisy labels of the sources
  std::string role;                 // "easy" | "hard"

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
};

/// Embed the selected samples with the feature extractor and normalize rows.
FeatureSet embed_features(const Mlp& extractor, const Dataset& ds,
                          const std::vector<int>& indices, const std::string& role);

/// Synthesized anchors with target labels and provenance. Provenance pairs
/// are row indices into the feature set the anchors were built from.
struct AnchorSet {
  Matrix anchors;  // rows L2-normalized
  std::vector<int> target_labels;
  std::vector<std::pair<int, int>> provenance;
  double lambda_p = 0.75;

  int size() const { return anchors.rows; }
};

/// For every feature u, draw `anchors_per_sample` partners v uniformly from
/// the other-class features. Throws ValidationError on a single-class set.
std::vector<std::pair<int, int>> sample_pairs(const FeatureSet& easy, int anchors_per_sample,
                                              Rng& rng);

/// Forward the concatenated pair through the hallucinator, before
/// normalization (reference hook for tests).
std::vector<double> hallucinate_raw(const Mlp& h, std::span<const double> u,
                                    std::span<const double> v);

/// L2-normalized hallucinated anchor for one pair.
std::vector<double> hallucinate(const Mlp& h, std::span<const double> u,
                                std::span<const double> v);

/// -lambda_p*cos(a,u) - (1-lambda_p)*cos(a,v); lambda_p must lie in
/// [0.5, 1.0] (ValidationError otherwise).
double similarity_loss(std::span<const double> anchor, std::span<const double> u,
                       std::span<const double> v, double lambda_p);

/// Similarity loss plus the classifier cross-entropy of the anchor against
/// the u-source label.
double hallucination_loss(const Mlp& h, const Mlp& classifier, std::span<const double> u,
                          std::span<const double> v, int label_u, double lambda_p);

/// Mean hallucination loss over a batch of pairs; optionally fills analytic
/// gradients for the hallucinator and the classifier.
double hallucination_batch_loss(const Mlp& h, const Mlp& classifier, const FeatureSet& easy,
                                std::span<const std::pair<int, int>> pairs, double lambda_p,
                                GradientBundle* h_grads = nullptr,
                                GradientBundle* g_grads = nullptr);

/// Anchors for every pair, labeled by the u-source noisy label.
AnchorSet make_anchors(const Mlp& h, const FeatureSet& easy,
                       std::span<const std::pair<int, int>> pairs, double lambda_p);

struct HallTrainConfig {
  int epochs = 5;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int anchors_per_sample = 4;
  double lambda_p = 0.75;
};

/// Train the hallucinator on frozen easy features with a frozen classifier.
/// Pairs are sampled once per call; returns the per-epoch mean loss.
std::vector<double> train_hallucinator(Mlp& h, const Mlp& classifier, const FeatureSet& easy,
                                       const HallTrainConfig& cfg, Rng& rng);

/// Anchor dump in the container format (vectors, labels, provenance mapped
/// to dataset ids) for external embedding plots.
void export_anchors(const std::string& path, const AnchorSet& anchors, const FeatureSet& easy);

}  // namespace nll

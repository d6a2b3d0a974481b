#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nll/matrix.hpp"
#include "nll/nn.hpp"

namespace nll {

/// Label-noise recipe. `rate` is the target fraction of flipped training
/// labels; kind-specific knobs are ignored by the other kinds.
struct NoiseSpec {
  enum class Kind { None, Symmetric, Asymmetric, FeatureDependent, ClassificationBased };
  Kind kind = Kind::None;
  double rate = 0.0;
  int parts = 4;          // feature-dependent: input slices
  int probe_epochs = 20;  // classification-based: probe training length

  static Kind kind_from_string(const std::string& s);
  static std::string kind_to_string(Kind k);
};

/// A synthetic classification dataset. `true_labels` exist for evaluation
/// only and are never consumed by a training path; training sees
/// `noisy_labels`. Clean splits (val/test) keep the two identical.
struct Dataset {
  Matrix inputs;  // N x input_dim
  std::vector<int> true_labels;
  std::vector<int> noisy_labels;
  int class_count = 0;
  std::string split = "train";  // train | val | test
  std::uint64_t seed = 0;
  NoiseSpec noise;

  int size() const { return inputs.rows; }
  int input_dim() const { return inputs.cols; }
  /// Per-class counts of noisy labels.
  std::vector<int> class_counts() const;
};

/// Gaussian-blob generator. Class identity lives in one half of the input
/// dims; the other half carries a per-class "context" component. A
/// `hard_frac` fraction of samples is drawn with another class's context,
/// yielding correctly-labeled samples that sit near the decision boundary.
struct BlobSpec {
  int classes = 4;
  int per_class = 500;
  int input_dim = 16;
  double overlap = 0.3;    // 0 = far-separated means, 1 = coincident
  double hard_frac = 0.0;  // fraction with swapped context component
};

Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed, const std::string& split = "train");

/// Train/val/test triple drawn from one shared cluster geometry.
struct DatasetFamily {
  Dataset train, val, test;
};
DatasetFamily make_dataset_family(const BlobSpec& train_spec, int val_per_class,
                                  int test_per_class, std::uint64_t seed);

/// Flip exactly round(rate*N) uniformly chosen training labels to a
/// uniformly random different class.
Dataset inject_symmetric(const Dataset& ds, double rate, std::uint64_t seed);

/// Same forced count, but flips follow the fixed cyclic map j -> j+1 mod C.
Dataset inject_asymmetric(const Dataset& ds, double rate, std::uint64_t seed);

/// Diagnostics surfaced by the feature-dependent injector (evaluation only).
struct FdNoiseDiag {
  Matrix part_scores;            // N x parts, raw projection scores
  std::vector<int> bins;         // N x parts flattened, quantile bin per part
  std::vector<double> flip_prob; // per-sample flip probability after rescale
};

/// Instance-dependent noise: inputs are sliced into `parts`, each part is
/// scored by a seeded random projection, scores select per-part transition
/// rows, and the row mixture (mean over parts) gives each sample its own
/// flip probability and flip-target distribution. Probabilities are
/// rescaled so their dataset mean equals `rate`, then flips are sampled.
Dataset inject_feature_dependent(const Dataset& ds, double rate, int parts, std::uint64_t seed,
                                 FdNoiseDiag* diag = nullptr);

/// Probe statistics surfaced by the classification-based injector.
struct CbNoiseDiag {
  Matrix avg_softmax;               // N x C, averaged over probe epochs
  std::vector<double> confusion;    // per-sample max non-true averaged mass
  std::vector<int> flipped_indices; // the round(rate*N) flipped samples
};

/// Instance-dependent noise from a probe classifier: an MLP is trained on
/// the clean labels for `probe_epochs`, per-epoch softmax outputs are
/// averaged per sample, and the round(rate*N) samples with the largest
/// non-true-class averaged probability are flipped to that class.
Dataset inject_classification_based(const Dataset& ds, double rate, int probe_epochs,
                                    std::uint64_t seed, CbNoiseDiag* diag = nullptr);

/// Fraction of samples whose noisy label differs from the true label.
double noise_rate(const Dataset& ds);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

/// CSV with columns id,label_noisy,label_true,x_0..x_{D-1}.
void export_dataset_csv(const std::string& path, const Dataset& ds);

}  // namespace nll

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nll/config.hpp"
#include "nll/correction.hpp"
#include "nll/selection.hpp"

namespace nll {

/// The three trainable networks of one experiment.
struct ModelBundle {
  Mlp feature_extractor;
  Mlp classifier;
  Mlp hallucinator;

  static ModelBundle init(const RunConfig& cfg, int input_dim, int class_count, Rng& rng);
};

/// One metrics-stream record. Fields that are undefined for a phase (e.g.
/// correction metrics during warm-up) serialize as null. Wall-clock timing
/// deliberately lives outside this record so metric streams are
/// byte-reproducible; see timing.log.
struct EpochMetrics {
  int epoch = 0;                 // global, 1-based
  std::string phase;             // warmup | classification | hallucinator
  int outer_iteration = 0;       // 0 during warm-up
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> easy_precision;
  std::optional<double> easy_recall;
  std::optional<double> correction_accuracy;
  std::optional<double> correction_coverage;
  double noise_rate = 0.0;

  nlohmann::json to_json() const;
};

/// Artifacts of one classification phase, kept for metrics and tests.
struct PhaseArtifacts {
  EasySplit split;
  SelectionQuality quality;
  int hard_count = 0;
  int corrected_count = 0;
  std::optional<double> correction_accuracy;  // against hidden true labels
  std::vector<int> labeled_indices;
  std::vector<int> unlabeled_indices;
};

/// Argmax accuracy of the classifier over a clean split.
double evaluate_accuracy(const Mlp& extractor, const Mlp& classifier, const Dataset& ds);

/// Mean CE of each sample against its noisy label (one full forward pass).
LossRecord per_sample_losses(const Mlp& extractor, const Mlp& classifier, const Dataset& ds,
                             int epoch);

/// Orchestrates warm-up and the iterative two-phase schedule over one
/// config. Phases are public so tests can drive them step by step;
/// run_experiment() is the one-call variant the CLI uses.
class Experiment {
 public:
  explicit Experiment(const RunConfig& cfg);

  /// Cross-entropy training on all noisy labels; records the last epoch's
  /// per-sample losses for the selection stage.
  LossRecord warmup();

  /// Easy selection, anchor hallucination (full mode), hard-label
  /// correction (full mode), then semi-supervised training of the
  /// extractor and classifier with the hallucinator frozen.
  PhaseArtifacts classification_phase(int outer_iteration);

  /// Trains the hallucinator on the current easy features with the
  /// extractor and classifier frozen. Returns the per-epoch loss curve.
  std::vector<double> hallucinator_phase(int outer_iteration);

  double evaluate(const Dataset& split) const;

  const RunConfig& config() const { return cfg_; }
  const DatasetFamily& dataset() const { return data_; }
  const ModelBundle& models() const { return models_; }
  ModelBundle& models() { return models_; }
  const std::vector<EpochMetrics>& metrics() const { return metrics_; }
  const std::vector<long long>& epoch_wall_ms() const { return wall_ms_; }
  const PhaseArtifacts& last_artifacts() const { return artifacts_; }
  double best_val_accuracy() const { return best_val_; }
  int best_epoch() const { return best_epoch_; }
  const ModelBundle& best_models() const { return best_models_; }

 private:
  void record_epoch(const std::string& phase, int outer_iteration, double train_loss,
                    long long wall_ms);
  std::vector<double> jitter_sigma_vector() const;

  RunConfig cfg_;
  DatasetFamily data_;
  ModelBundle models_;
  OptimizerState f_opt_, g_opt_;
  Rng rng_;
  double realized_noise_rate_ = 0.0;
  bool warmed_up_ = false;
  int global_epoch_ = 0;
  int ssl_epochs_seen_ = 0;
  std::vector<EpochMetrics> metrics_;
  std::vector<long long> wall_ms_;
  PhaseArtifacts artifacts_;
  bool have_artifacts_ = false;
  double best_val_ = -1.0;
  int best_epoch_ = 0;
  ModelBundle best_models_;
};

/// Outcome of a full run; summary fields mirror summary.json.
struct RunResult {
  nlohmann::json summary;
  std::string metrics_path;
  std::string checkpoint_path;
};

/// Warm-up plus alternating classification/hallucinator phases, metrics
/// streamed to <out_dir>/metrics.jsonl, best-validation checkpoint written
/// to <out_dir>/best.ckpt, summary to <out_dir>/summary.json.
RunResult run_experiment(const RunConfig& cfg, const std::string& out_dir, bool quiet = true);

}  // namespace nll

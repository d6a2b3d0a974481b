#pragma once

#include <string>
#include <vector>

#include "nll/data.hpp"

namespace nll {

/// Per-sample cross-entropy losses against the noisy labels for one epoch.
struct LossRecord {
  std::vector<double> losses;
  int epoch = 0;
};

/// Two-component 1-D Gaussian mixture fitted to a loss record by EM.
/// Component 0 is the smaller-mean component. Means/variances are reported
/// on the original loss scale; EM itself runs on min-max-normalized losses
/// for conditioning, which leaves posteriors unchanged.
struct GmmFit {
  double mean[2] = {0.0, 0.0};
  double var[2] = {0.0, 0.0};
  double weight[2] = {0.5, 0.5};
  std::vector<double> posterior_small;  // per-sample P(component 0 | loss)
  int iterations = 0;
  double log_likelihood = 0.0;
  std::vector<double> ll_trace;  // per-iteration log-likelihood
  std::vector<double> losses;    // the record the fit was computed from
};

/// EM until the log-likelihood gain drops below 1e-6 or 200 iterations.
/// Initialization: means at the 10th/90th loss percentiles, equal weights,
/// pooled variance; variance floor 1e-6. Throws DegenerateFitError when all
/// losses are identical, ValidationError for N < 4.
GmmFit fit_gmm2(const LossRecord& record);

/// Easiness score per sample: the posterior of the small-mean component,
/// made monotonically non-increasing in the loss value (ties keep equal
/// scores).
std::vector<double> easiness_scores(const GmmFit& fit);

/// Class-balanced easy/hard partition.
struct EasySplit {
  std::vector<double> scores;    // easiness per sample
  std::vector<int> easy;         // ascending sample indices
  std::vector<int> hard;         // ascending sample indices
  std::vector<int> easy_counts;  // realized per-class easy counts M_j
  std::vector<int> class_totals; // per-class noisy-label counts N_j
  double percent = 60.0;         // the P used
};

/// For each class j, the min(ceil(N*(P/100)/C), N_j) samples with the
/// highest easiness among noisy-label class j become easy; ties break
/// toward the lower sample index.
EasySplit class_balanced_split(const Dataset& ds, const std::vector<double>& easiness,
                               double percent);

/// Unbalanced split: easy = {easiness > threshold}. Used by the plain
/// GMM-selection ablation.
EasySplit threshold_split(const Dataset& ds, const std::vector<double>& easiness,
                          double threshold = 0.5);

/// Selection quality against the hidden true labels (evaluation only).
struct SelectionQuality {
  double precision = 0.0;  // easy samples whose noisy label is correct
  double recall = 0.0;     // clean samples captured in easy
};
SelectionQuality selection_quality(const EasySplit& split, const Dataset& ds);

/// CSV with columns id,class,easiness,partition.
void export_split_csv(const std::string& path, const EasySplit& split, const Dataset& ds);

}  // namespace nll

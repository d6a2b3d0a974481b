#pragma once

#include <span>
#include <string>
#include <vector>

#include "nll/hallucinator.hpp"

namespace nll {

/// An anchor admitted as a voter for its nearest hard feature.
struct ValidRepresentative {
  int anchor_index = -1;
  int hard_index = -1;     // row in the hard feature set
  double similarity = 0.0; // cosine to that row, > lambda_conf
  int label = -1;          // the anchor's target label
};

/// Exhaustive argmax of cosine similarity over the hard set; ties resolve
/// to the lowest index. Throws DomainError on an empty hard set.
std::pair<int, double> nearest_hard(std::span<const double> anchor, const FeatureSet& hard);

/// The anchors whose nearest-hard similarity exceeds lambda_conf, each
/// bound to its maximizer. lambda_conf must lie in (-1, 1).
std::vector<ValidRepresentative> validate_anchors(const AnchorSet& anchors,
                                                  const FeatureSet& hard, double lambda_conf);

/// Group valid representatives by their matched hard sample and keep the K
/// highest-similarity ones per sample.
std::vector<std::vector<ValidRepresentative>> attach_representatives(
    const std::vector<ValidRepresentative>& valids, int hard_count, int max_representatives);

/// Plurality vote over one hard sample's representatives. Ties break toward
/// the label with the higher summed similarity, then the lower class index.
/// An empty list abstains.
struct VoteOutcome {
  bool corrected = false;
  int label = -1;
  double confidence = 0.0;  // winning votes / total votes
};
VoteOutcome majority_vote(const std::vector<ValidRepresentative>& representatives);

/// Hard-set partition after label correction. Indices are rows of the hard
/// feature set.
struct CorrectionResult {
  std::vector<int> corrected;             // S_h^c rows
  std::vector<int> voted_labels;          // parallel to corrected
  std::vector<double> confidences;        // parallel to corrected
  std::vector<int> residual;              // S_h^n rows
  std::vector<std::vector<ValidRepresentative>> representatives;  // per hard row
};

/// Full correction pass: validate anchors, attach up to K representatives,
/// vote. Samples whose vote confidence falls below `confidence_floor`
/// abstain into the residual set.
CorrectionResult correct_hard(const AnchorSet& anchors, const FeatureSet& hard,
                              double lambda_conf, int max_representatives,
                              double confidence_floor = 0.5);

/// CSV: hard_id,voted_label,confidence,n_reps,original_noisy_label,true_label.
void export_correction_csv(const std::string& path, const CorrectionResult& result,
                           const FeatureSet& hard, const Dataset* ds = nullptr);

}  // namespace nll

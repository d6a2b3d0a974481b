#include "nll/correction.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "nll/errors.hpp"
#include "nll/losses.hpp"

namespace nll {

std::pair<int, double> nearest_hard(std::span<const double> anchor, const FeatureSet& hard) {
  if (hard.size() == 0) throw DomainError("nearest_hard: empty hard set");
  int best = 0;
  double best_sim = cosine_similarity(anchor, hard.features.row(0));
  for (int i = 1; i < hard.size(); ++i) {
    const double sim = cosine_similarity(anchor, hard.features.row(i));
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return {best, best_sim};
}

std::vector<ValidRepresentative> validate_anchors(const AnchorSet& anchors,
                                                  const FeatureSet& hard, double lambda_conf) {
  if (lambda_conf <= -1.0 || lambda_conf >= 1.0) {
    throw ValidationError("validate_anchors: lambda_conf must be in (-1, 1)");
  }
  std::vector<ValidRepresentative> valids;
  for (int a = 0; a < anchors.size(); ++a) {
    const auto [r, sim] = nearest_hard(anchors.anchors.row(a), hard);
    if (sim > lambda_conf) {
      valids.push_back({a, r, sim, anchors.target_labels[a]});
    }
  }
  return valids;
}

std::vector<std::vector<ValidRepresentative>> attach_representatives(
    const std::vector<ValidRepresentative>& valids, int hard_count, int max_representatives) {
  if (max_representatives < 1) {
    throw ValidationError("attach_representatives: K must be >= 1");
  }
  std::vector<std::vector<ValidRepresentative>> per_hard(hard_count);
  for (const auto& v : valids) per_hard[v.hard_index].push_back(v);
  for (auto& reps : per_hard) {
    std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.anchor_index < b.anchor_index;
    });
    if (static_cast<int>(reps.size()) > max_representatives) {
      reps.resize(max_representatives);
    }
  }
  return per_hard;
}

VoteOutcome majority_vote(const std::vector<ValidRepresentative>& representatives) {
  if (representatives.empty()) return {};
  std::map<int, int> votes;
  std::map<int, double> sims;
  for (const auto& r : representatives) {
    votes[r.label]++;
    sims[r.label] += r.similarity;
  }
  int best_label = -1;
  int best_votes = -1;
  double best_sim = 0.0;
  for (const auto& [label, count] : votes) {
    const double sim = sims[label];
    // plurality; ties -> higher summed similarity -> lower class index
    const bool wins = count > best_votes ||
                      (count == best_votes && sim > best_sim) ||
                      (count == best_votes && sim == best_sim && label < best_label);
    if (wins) {
      best_label = label;
      best_votes = count;
      best_sim = sim;
    }
  }
  VoteOutcome out;
  out.corrected = true;
  out.label = best_label;
  out.confidence = static_cast<double>(best_votes) / representatives.size();
  return out;
}

CorrectionResult correct_hard(const AnchorSet& anchors, const FeatureSet& hard,
                              double lambda_conf, int max_representatives,
                              double confidence_floor) {
  CorrectionResult result;
  const auto valids = validate_anchors(anchors, hard, lambda_conf);
  result.representatives = attach_representatives(valids, hard.size(), max_representatives);
  for (int i = 0; i < hard.size(); ++i) {
    const VoteOutcome vote = majority_vote(result.representatives[i]);
    if (vote.corrected && vote.confidence >= confidence_floor) {
      result.corrected.push_back(i);
      result.voted_labels.push_back(vote.label);
      result.confidences.push_back(vote.confidence);
    } else {
      result.residual.push_back(i);
    }
  }
  return result;
}

void export_correction_csv(const std::string& path, const CorrectionResult& result,
                           const FeatureSet& hard, const Dataset* ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "hard_id,voted_label,confidence,n_reps,original_noisy_label,true_label\n";
  std::vector<int> voted(hard.size(), -1);
  std::vector<double> conf(hard.size(), 0.0);
  for (std::size_t k = 0; k < result.corrected.size(); ++k) {
    voted[result.corrected[k]] = result.voted_labels[k];
    conf[result.corrected[k]] = result.confidences[k];
  }
  for (int i = 0; i < hard.size(); ++i) {
    const int id = hard.source_indices[i];
    out << id << "," << voted[i] << "," << conf[i] << "," << result.representatives[i].size()
        << "," << hard.labels[i] << ",";
    if (ds) out << ds->true_labels[id];
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace nll

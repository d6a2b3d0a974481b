#include "nll/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "nll/errors.hpp"

namespace nll {

namespace {

constexpr double VARIANCE_FLOOR = 1e-6;
constexpr double WEIGHT_FLOOR = 1e-9;
constexpr int MAX_EM_ITERS = 200;
constexpr double LL_TOLERANCE = 1e-6;

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
}

}  // namespace

GmmFit fit_gmm2(const LossRecord& record) {
  const auto& raw = record.losses;
  const int n = static_cast<int>(raw.size());
  if (n < 4) throw ValidationError("fit_gmm2: need at least 4 samples");
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("fit_gmm2: losses must be finite and >= 0");
  }
  const auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *mn_it, hi = *mx_it;
  if (hi - lo <= 0.0) throw DegenerateFitError("fit_gmm2: all losses identical");
  const double range = hi - lo;

  // min-max scale to [0, 1]; an affine map leaves posteriors unchanged
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = (raw[i] - lo) / range;

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  auto percentile = [&](double q) {
    return sorted[static_cast<std::size_t>(q * (n - 1))];
  };
  double mean[2] = {percentile(0.10), percentile(0.90)};
  double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double pooled = 0.0;
  for (double v : x) pooled += (v - mu) * (v - mu);
  pooled = std::max(pooled / n, VARIANCE_FLOOR);
  double var[2] = {pooled, pooled};
  double weight[2] = {0.5, 0.5};

  GmmFit fit;
  fit.losses = raw;
  std::vector<double> resp0(n);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < MAX_EM_ITERS; ++iter) {
    // E step
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      const double l0 = std::log(weight[0]) + log_normal_pdf(x[i], mean[0], var[0]);
      const double l1 = std::log(weight[1]) + log_normal_pdf(x[i], mean[1], var[1]);
      const double m = std::max(l0, l1);
      const double s = std::exp(l0 - m) + std::exp(l1 - m);
      ll += m + std::log(s);
      resp0[i] = std::exp(l0 - m) / s;
    }
    fit.ll_trace.push_back(ll);
    fit.iterations = iter + 1;
    if (ll - prev_ll < LL_TOLERANCE && iter > 0) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
    // keep reported parameters consistent with the last E step
    if (iter == MAX_EM_ITERS - 1) break;

    // M step
    double n0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < n; ++i) {
      n0 += resp0[i];
      s0 += resp0[i] * x[i];
      s1 += (1.0 - resp0[i]) * x[i];
    }
    const double n1 = n - n0;
    weight[0] = std::clamp(n0 / n, WEIGHT_FLOOR, 1.0 - WEIGHT_FLOOR);
    weight[1] = 1.0 - weight[0];
    mean[0] = s0 / std::max(n0, WEIGHT_FLOOR);
    mean[1] = s1 / std::max(n1, WEIGHT_FLOOR);
    double v0 = 0.0, v1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d0 = x[i] - mean[0];
      const double d1 = x[i] - mean[1];
      v0 += resp0[i] * d0 * d0;
      v1 += (1.0 - resp0[i]) * d1 * d1;
    }
    var[0] = std::max(v0 / std::max(n0, WEIGHT_FLOOR), VARIANCE_FLOOR);
    var[1] = std::max(v1 / std::max(n1, WEIGHT_FLOOR), VARIANCE_FLOOR);
  }

  // component 0 reports the smaller mean
  int small = mean[0] <= mean[1] ? 0 : 1;
  fit.posterior_small.resize(n);
  for (int i = 0; i < n; ++i) fit.posterior_small[i] = small == 0 ? resp0[i] : 1.0 - resp0[i];
  for (int k = 0; k < 2; ++k) {
    const int src = (k == 0) ? small : 1 - small;
    fit.mean[k] = lo + mean[src] * range;
    fit.var[k] = var[src] * range * range;
    fit.weight[k] = weight[src];
  }
  // constant shift maps the scaled-data log-likelihood back to loss scale
  const double shift = n * std::log(range);
  fit.log_likelihood = prev_ll - shift;
  for (auto& v : fit.ll_trace) v -= shift;
  return fit;
}

std::vector<double> easiness_scores(const GmmFit& fit) {
  const int n = static_cast<int>(fit.posterior_small.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (fit.losses[a] != fit.losses[b]) return fit.losses[a] < fit.losses[b];
    return a < b;
  });
  // enforce: larger loss never gets a larger score; equal losses tie
  std::vector<double> scores(n);
  double running = 1.0;
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    if (k > 0 && fit.losses[i] == fit.losses[order[k - 1]]) {
      scores[i] = scores[order[k - 1]];
      continue;
    }
    running = std::min(running, fit.posterior_small[i]);
    scores[i] = running;
  }
  return scores;
}

namespace {

// ceil(N * (P/100) / C) without floating-point edge cases for integral P
int easy_quota(int n, double percent, int classes) {
  const long long np = static_cast<long long>(n) * static_cast<long long>(std::llround(percent));
  if (std::abs(percent - std::llround(percent)) < 1e-12) {
    const long long denom = 100LL * classes;
    return static_cast<int>((np + denom - 1) / denom);
  }
  const long double exact =
      static_cast<long double>(n) * static_cast<long double>(percent) / (100.0L * classes);
  const long double snapped = std::llround(static_cast<double>(exact));
  if (std::abs(static_cast<double>(exact - snapped)) < 1e-9) return static_cast<int>(snapped);
  return static_cast<int>(std::ceil(static_cast<double>(exact)));
}

EasySplit finish_split(EasySplit split) {
  std::sort(split.easy.begin(), split.easy.end());
  std::sort(split.hard.begin(), split.hard.end());
  return split;
}

}  // namespace

EasySplit class_balanced_split(const Dataset& ds, const std::vector<double>& easiness,
                               double percent) {
  const int n = ds.size();
  if (static_cast<int>(easiness.size()) != n) {
    throw ShapeError("class_balanced_split: easiness length mismatch");
  }
  if (percent <= 0.0 || percent > 100.0) {
    throw ValidationError("class_balanced_split: P must be in (0, 100]");
  }
  EasySplit split;
  split.scores = easiness;
  split.percent = percent;
  split.class_totals = ds.class_counts();
  split.easy_counts.assign(ds.class_count, 0);

  const int quota = easy_quota(n, percent, ds.class_count);

  std::vector<std::vector<int>> by_class(ds.class_count);
  for (int i = 0; i < n; ++i) by_class[ds.noisy_labels[i]].push_back(i);

  for (int j = 0; j < ds.class_count; ++j) {
    if (split.class_totals[j] == 0) {
      throw ValidationError("class_balanced_split: class " + std::to_string(j) +
                            " has no samples");
    }
    auto& members = by_class[j];
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      if (easiness[a] != easiness[b]) return easiness[a] > easiness[b];
      return a < b;
    });
    const int take = std::min(quota, split.class_totals[j]);
    split.easy_counts[j] = take;
    for (int k = 0; k < static_cast<int>(members.size()); ++k) {
      (k < take ? split.easy : split.hard).push_back(members[k]);
    }
  }
  return finish_split(std::move(split));
}

EasySplit threshold_split(const Dataset& ds, const std::vector<double>& easiness,
                          double threshold) {
  const int n = ds.size();
  if (static_cast<int>(easiness.size()) != n) {
    throw ShapeError("threshold_split: easiness length mismatch");
  }
  EasySplit split;
  split.scores = easiness;
  split.percent = 0.0;
  split.class_totals = ds.class_counts();
  split.easy_counts.assign(ds.class_count, 0);
  for (int i = 0; i < n; ++i) {
    if (easiness[i] > threshold) {
      split.easy.push_back(i);
      split.easy_counts[ds.noisy_labels[i]]++;
    } else {
      split.hard.push_back(i);
    }
  }
  return finish_split(std::move(split));
}

SelectionQuality selection_quality(const EasySplit& split, const Dataset& ds) {
  SelectionQuality q;
  int easy_clean = 0;
  for (int i : split.easy) {
    if (ds.noisy_labels[i] == ds.true_labels[i]) easy_clean++;
  }
  int total_clean = 0;
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.noisy_labels[i] == ds.true_labels[i]) total_clean++;
  }
  q.precision = split.easy.empty() ? 0.0 : static_cast<double>(easy_clean) / split.easy.size();
  q.recall = total_clean == 0 ? 0.0 : static_cast<double>(easy_clean) / total_clean;
  return q;
}

void export_split_csv(const std::string& path, const EasySplit& split, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  std::vector<char> is_easy(ds.size(), 0);
  for (int i : split.easy) is_easy[i] = 1;
  out << "id,class,easiness,partition\n";
  for (int i = 0; i < ds.size(); ++i) {
    out << i << "," << ds.noisy_labels[i] << "," << split.scores[i] << ","
        << (is_easy[i] ? "easy" : "hard") << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace nll

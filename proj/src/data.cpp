#include "nll/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "nll/container.hpp"
#include "nll/errors.hpp"
#include "nll/losses.hpp"

namespace nll {

NoiseSpec::Kind NoiseSpec::kind_from_string(const std::string& s) {
  if (s == "none") return Kind::None;
  if (s == "symmetric") return Kind::Symmetric;
  if (s == "asymmetric") return Kind::Asymmetric;
  if (s == "feature_dependent") return Kind::FeatureDependent;
  if (s == "classification_based") return Kind::ClassificationBased;
  throw ValidationError("unknown noise kind: " + s);
}

std::string NoiseSpec::kind_to_string(Kind k) {
  switch (k) {
    case Kind::None: return "none";
    case Kind::Symmetric: return "symmetric";
    case Kind::Asymmetric: return "asymmetric";
    case Kind::FeatureDependent: return "feature_dependent";
    case Kind::ClassificationBased: return "classification_based";
  }
  return "none";
}

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(class_count, 0);
  for (int y : noisy_labels) counts[y]++;
  return counts;
}

namespace {

// Random directions, orthonormalized when the subspace allows it, so the
// pairwise distance between scaled class means is controlled exactly.
std::vector<std::vector<double>> class_directions(int classes, int dim, Rng& rng) {
  std::vector<std::vector<double>> dirs(classes, std::vector<double>(dim));
  for (auto& d : dirs)
    for (auto& v : d) v = rng.normal();
  if (dim >= classes) {
    for (int i = 0; i < classes; ++i) {
      for (int j = 0; j < i; ++j) {
        const double proj = dot(std::span<const double>(dirs[i]), std::span<const double>(dirs[j]));
        for (int k = 0; k < dim; ++k) dirs[i][k] -= proj * dirs[j][k];
      }
      l2_normalize(std::span<double>(dirs[i]));
    }
  } else {
    for (auto& d : dirs) l2_normalize(std::span<double>(d));
  }
  return dirs;
}

struct BlobGeometry {
  int core_dims = 0;
  int ctx_dims = 0;
  std::vector<std::vector<double>> core_means;  // per class
  std::vector<std::vector<double>> ctx_means;   // per class (empty if ctx_dims == 0)
};

BlobGeometry make_geometry(const BlobSpec& spec, Rng& rng) {
  BlobGeometry geo;
  geo.ctx_dims = spec.input_dim / 2;
  geo.core_dims = spec.input_dim - geo.ctx_dims;
  const double separation = 8.0 * (1.0 - spec.overlap);
  const double scale = separation / std::sqrt(2.0);

  geo.core_means = class_directions(spec.classes, geo.core_dims, rng);
  for (auto& m : geo.core_means)
    for (auto& v : m) v *= scale;
  if (geo.ctx_dims > 0) {
    geo.ctx_means = class_directions(spec.classes, geo.ctx_dims, rng);
    for (auto& m : geo.ctx_means)
      for (auto& v : m) v *= scale;
  }
  return geo;
}

Dataset sample_blobs(const BlobSpec& spec, const BlobGeometry& geo, int per_class,
                     std::uint64_t seed, const std::string& split, Rng& rng) {
  const int N = spec.classes * per_class;
  Dataset ds;
  ds.inputs = Matrix(N, spec.input_dim);
  ds.true_labels.resize(N);
  ds.noisy_labels.resize(N);
  ds.class_count = spec.classes;
  ds.split = split;
  ds.seed = seed;

  for (int c = 0; c < spec.classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      const int i = c * per_class + k;
      ds.true_labels[i] = c;
      ds.noisy_labels[i] = c;
      auto row = ds.inputs.row(i);
      for (int j = 0; j < geo.core_dims; ++j) row[j] = geo.core_means[c][j] + rng.normal();
      if (geo.ctx_dims > 0) {
        int ctx_class = c;
        if (spec.hard_frac > 0.0 && rng.uniform() < spec.hard_frac) {
          // correctly labeled, but drawn with another class's context
          const std::size_t other = rng.index(static_cast<std::size_t>(spec.classes - 1));
          ctx_class = static_cast<int>(other) >= c ? static_cast<int>(other) + 1
                                                   : static_cast<int>(other);
        }
        for (int j = 0; j < geo.ctx_dims; ++j) {
          row[geo.core_dims + j] = geo.ctx_means[ctx_class][j] + rng.normal();
        }
      }
    }
  }
  return ds;
}

void require_clean_train(const Dataset& ds, const char* who) {
  if (ds.split != "train") {
    throw ValidationError(std::string(who) + ": noise is injected into training splits only");
  }
  if (ds.noisy_labels != ds.true_labels) {
    throw ValidationError(std::string(who) + ": dataset already carries label noise");
  }
}

void validate_rate(double rate, const char* who) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ValidationError(std::string(who) + ": noise rate must be in [0, 1)");
  }
}

int forced_flip_count(double rate, int n) {
  return static_cast<int>(std::lround(rate * n));
}

}  // namespace

Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed, const std::string& split) {
  if (spec.classes < 2) throw ValidationError("make_blobs: need at least 2 classes");
  if (spec.per_class < 1) throw ValidationError("make_blobs: per_class must be positive");
  if (spec.input_dim < 1) throw ValidationError("make_blobs: input_dim must be positive");
  if (spec.overlap < 0.0 || spec.overlap > 1.0) {
    throw ValidationError("make_blobs: overlap must be in [0, 1]");
  }
  if (spec.hard_frac < 0.0 || spec.hard_frac > 1.0) {
    throw ValidationError("make_blobs: hard_frac must be in [0, 1]");
  }
  Rng root(seed);
  Rng geo_rng = root.sub(0);
  Rng sample_rng = root.sub(1);
  const BlobGeometry geo = make_geometry(spec, geo_rng);
  return sample_blobs(spec, geo, spec.per_class, seed, split, sample_rng);
}

DatasetFamily make_dataset_family(const BlobSpec& train_spec, int val_per_class,
                                  int test_per_class, std::uint64_t seed) {
  if (val_per_class < 1 || test_per_class < 1) {
    throw ValidationError("make_dataset_family: split sizes must be positive");
  }
  Rng root(seed);
  Rng geo_rng = root.sub(0);
  const BlobGeometry geo = make_geometry(train_spec, geo_rng);
  Rng train_rng = root.sub(1);
  Rng val_rng = root.sub(2);
  Rng test_rng = root.sub(3);
  DatasetFamily fam;
  fam.train = sample_blobs(train_spec, geo, train_spec.per_class, seed, "train", train_rng);
  fam.val = sample_blobs(train_spec, geo, val_per_class, seed, "val", val_rng);
  fam.test = sample_blobs(train_spec, geo, test_per_class, seed, "test", test_rng);
  return fam;
}

Dataset inject_symmetric(const Dataset& ds, double rate, std::uint64_t seed) {
  validate_rate(rate, "inject_symmetric");
  require_clean_train(ds, "inject_symmetric");
  Dataset out = ds;
  out.noise = {NoiseSpec::Kind::Symmetric, rate, 0, 0};
  const int k = forced_flip_count(rate, ds.size());
  Rng rng(seed);
  auto perm = rng.permutation(ds.size());
  for (int j = 0; j < k; ++j) {
    const int i = static_cast<int>(perm[j]);
    const int y = out.true_labels[i];
    const std::size_t draw = rng.index(static_cast<std::size_t>(ds.class_count - 1));
    out.noisy_labels[i] = static_cast<int>(draw) >= y ? static_cast<int>(draw) + 1
                                                      : static_cast<int>(draw);
  }
  return out;
}

Dataset inject_asymmetric(const Dataset& ds, double rate, std::uint64_t seed) {
  validate_rate(rate, "inject_asymmetric");
  require_clean_train(ds, "inject_asymmetric");
  Dataset out = ds;
  out.noise = {NoiseSpec::Kind::Asymmetric, rate, 0, 0};
  const int k = forced_flip_count(rate, ds.size());
  Rng rng(seed);
  auto perm = rng.permutation(ds.size());
  for (int j = 0; j < k; ++j) {
    const int i = static_cast<int>(perm[j]);
    out.noisy_labels[i] = (out.true_labels[i] + 1) % ds.class_count;
  }
  return out;
}

Dataset inject_feature_dependent(const Dataset& ds, double rate, int parts, std::uint64_t seed,
                                 FdNoiseDiag* diag) {
  validate_rate(rate, "inject_feature_dependent");
  require_clean_train(ds, "inject_feature_dependent");
  if (parts < 1 || parts > ds.input_dim()) {
    throw ValidationError("inject_feature_dependent: parts must be in [1, input_dim]");
  }
  const int N = ds.size();
  const int C = ds.class_count;
  const int D = ds.input_dim();
  const int base = D / parts;
  constexpr int BINS = 10;
  constexpr double CAP = 0.95;

  Dataset out = ds;
  out.noise = {NoiseSpec::Kind::FeatureDependent, rate, parts, 0};

  Rng rng(seed);
  Rng proj_rng = rng.sub(0);
  Rng row_rng = rng.sub(1);
  Rng flip_rng = rng.sub(2);

  // part boundaries: equal slices, trailing part absorbs the remainder
  std::vector<std::pair<int, int>> bounds(parts);
  for (int p = 0; p < parts; ++p) {
    bounds[p] = {p * base, (p == parts - 1) ? D : (p + 1) * base};
  }

  // seeded random projection per part
  Matrix scores(N, parts);
  for (int p = 0; p < parts; ++p) {
    const auto [lo, hi] = bounds[p];
    std::vector<double> w(hi - lo);
    for (auto& v : w) v = proj_rng.normal();
    for (int n = 0; n < N; ++n) {
      auto row = ds.inputs.row(n);
      double s = 0.0;
      for (int j = lo; j < hi; ++j) s += w[j - lo] * row[j];
      scores(n, p) = s;
    }
  }

  // equal-frequency quantile bins per part
  std::vector<int> bins(static_cast<std::size_t>(N) * parts);
  for (int p = 0; p < parts; ++p) {
    std::vector<double> sorted(N);
    for (int n = 0; n < N; ++n) sorted[n] = scores(n, p);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (int q = 1; q < BINS; ++q) edges.push_back(sorted[static_cast<std::size_t>(q) * N / BINS]);
    for (int n = 0; n < N; ++n) {
      const auto it = std::upper_bound(edges.begin(), edges.end(), scores(n, p));
      bins[static_cast<std::size_t>(n) * parts + p] = static_cast<int>(it - edges.begin());
    }
  }

  // transition rows per (part, bin): a flip propensity plus a target-class row
  std::vector<double> propensity(static_cast<std::size_t>(parts) * BINS);
  std::vector<double> target_rows(static_cast<std::size_t>(parts) * BINS * C);
  for (int p = 0; p < parts; ++p) {
    for (int q = 0; q < BINS; ++q) {
      propensity[static_cast<std::size_t>(p) * BINS + q] = row_rng.uniform(0.05, 1.0);
      double sum = 0.0;
      const std::size_t off = (static_cast<std::size_t>(p) * BINS + q) * C;
      for (int c = 0; c < C; ++c) {
        target_rows[off + c] = row_rng.uniform();
        sum += target_rows[off + c];
      }
      for (int c = 0; c < C; ++c) target_rows[off + c] /= sum;
    }
  }

  // per-sample mixed propensity, label independent
  std::vector<double> phi(N, 0.0);
  for (int n = 0; n < N; ++n) {
    for (int p = 0; p < parts; ++p) {
      phi[n] += propensity[static_cast<std::size_t>(p) * BINS +
                           bins[static_cast<std::size_t>(n) * parts + p]];
    }
    phi[n] /= parts;
  }

  // rescale so the dataset-mean flip probability equals rate (cap at 0.95)
  std::vector<double> prob(N, 0.0);
  if (rate > 0.0) {
    double mean_phi = std::accumulate(phi.begin(), phi.end(), 0.0) / N;
    double scale = rate / mean_phi;
    for (int iter = 0; iter < 50; ++iter) {
      double mean = 0.0;
      for (int n = 0; n < N; ++n) {
        prob[n] = std::min(scale * phi[n], CAP);
        mean += prob[n];
      }
      mean /= N;
      if (std::abs(mean - rate) < 1e-12 || mean == 0.0) break;
      scale *= rate / mean;
    }
  }

  for (int n = 0; n < N; ++n) {
    const double u = flip_rng.uniform();
    if (u >= prob[n]) continue;
    const int y = ds.true_labels[n];
    double total = 0.0;
    std::vector<double> mass(C, 0.0);
    for (int p = 0; p < parts; ++p) {
      const std::size_t off =
          (static_cast<std::size_t>(p) * BINS + bins[static_cast<std::size_t>(n) * parts + p]) * C;
      for (int c = 0; c < C; ++c) mass[c] += target_rows[off + c];
    }
    mass[y] = 0.0;
    for (int c = 0; c < C; ++c) total += mass[c];
    int target = (y + 1) % C;
    if (total > 0.0) {
      double v = flip_rng.uniform() * total;
      for (int c = 0; c < C; ++c) {
        if (mass[c] <= 0.0) continue;
        v -= mass[c];
        if (v <= 0.0) {
          target = c;
          break;
        }
      }
    }
    out.noisy_labels[n] = target;
  }

  if (diag) {
    diag->part_scores = scores;
    diag->bins = bins;
    diag->flip_prob = prob;
  }
  return out;
}

Dataset inject_classification_based(const Dataset& ds, double rate, int probe_epochs,
                                    std::uint64_t seed, CbNoiseDiag* diag) {
  validate_rate(rate, "inject_classification_based");
  require_clean_train(ds, "inject_classification_based");
  if (probe_epochs < 1) {
    throw ValidationError("inject_classification_based: probe_epochs must be positive");
  }
  const int N = ds.size();
  const int C = ds.class_count;

  Rng rng(seed);
  Rng init_rng = rng.sub(0);
  Rng batch_rng = rng.sub(1);

  // probe: same MLP family as the pipeline's extractor + classifier
  const std::vector<int> dims = {ds.input_dim(), 64, 32, C};
  Mlp probe = Mlp::make(dims, init_rng);
  OptimizerState opt = OptimizerState::make(probe, 0.05, 0.9);
  constexpr int BATCH = 64;

  Matrix avg(N, C);
  for (int epoch = 0; epoch < probe_epochs; ++epoch) {
    auto perm = batch_rng.permutation(N);
    for (int start = 0; start < N; start += BATCH) {
      const int b = std::min(BATCH, N - start);
      Matrix xb(b, ds.input_dim());
      std::vector<int> yb(b);
      for (int i = 0; i < b; ++i) {
        const int src = static_cast<int>(perm[start + i]);
        std::copy(ds.inputs.row(src).begin(), ds.inputs.row(src).end(), xb.row(i).begin());
        yb[i] = ds.true_labels[src];
      }
      ForwardCache cache;
      Matrix logits = forward(probe, xb, cache);
      Matrix dlogits;
      ce_batch_with_grad(logits, yb, dlogits);
      GradientBundle grads;
      backward(probe, cache, dlogits, grads);
      sgd_step(probe, grads, opt);
    }
    // collect this epoch's softmax outputs
    Matrix probs = softmax_rows(forward(probe, ds.inputs));
    for (std::size_t i = 0; i < avg.a.size(); ++i) avg.a[i] += probs.a[i];
  }
  for (auto& v : avg.a) v /= probe_epochs;

  std::vector<double> confusion(N);
  std::vector<int> confusion_arg(N);
  for (int n = 0; n < N; ++n) {
    const int y = ds.true_labels[n];
    double best = -1.0;
    int arg = (y + 1) % C;
    for (int c = 0; c < C; ++c) {
      if (c == y) continue;
      if (avg(n, c) > best) {
        best = avg(n, c);
        arg = c;
      }
    }
    confusion[n] = best;
    confusion_arg[n] = arg;
  }

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (confusion[a] != confusion[b]) return confusion[a] > confusion[b];
    return a < b;
  });

  Dataset out = ds;
  out.noise = {NoiseSpec::Kind::ClassificationBased, rate, 0, probe_epochs};
  const int k = forced_flip_count(rate, N);
  std::vector<int> flipped(order.begin(), order.begin() + k);
  for (int idx : flipped) out.noisy_labels[idx] = confusion_arg[idx];

  if (diag) {
    diag->avg_softmax = avg;
    diag->confusion = confusion;
    diag->flipped_indices = flipped;
  }
  return out;
}

double noise_rate(const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  int flips = 0;
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.noisy_labels[i] != ds.true_labels[i]) flips++;
  }
  return static_cast<double>(flips) / ds.size();
}

void save_dataset(const std::string& path, const Dataset& ds) {
  Container c;
  c.meta["kind"] = "dataset";
  c.meta["n"] = ds.size();
  c.meta["input_dim"] = ds.input_dim();
  c.meta["classes"] = ds.class_count;
  c.meta["seed"] = ds.seed;
  c.meta["split"] = ds.split;
  c.meta["noise"] = {{"kind", NoiseSpec::kind_to_string(ds.noise.kind)},
                     {"rate", ds.noise.rate},
                     {"parts", ds.noise.parts},
                     {"probe_epochs", ds.noise.probe_epochs}};
  c.arrays.push_back(NamedArray::from_matrix("inputs", ds.inputs, "f32"));
  c.arrays.push_back(NamedArray::from_ints("true_labels", ds.true_labels));
  c.arrays.push_back(NamedArray::from_ints("noisy_labels", ds.noisy_labels));
  save_container(path, c);
}

Dataset load_dataset(const std::string& path) {
  Container c = load_container(path);
  if (c.meta.value("kind", "") != "dataset") throw IoError("not a dataset file: " + path);
  Dataset ds;
  ds.inputs = c.get("inputs").to_matrix();
  const auto& t = c.get("true_labels").i;
  const auto& n = c.get("noisy_labels").i;
  ds.true_labels.assign(t.begin(), t.end());
  ds.noisy_labels.assign(n.begin(), n.end());
  ds.class_count = c.meta.at("classes").get<int>();
  ds.split = c.meta.value("split", "train");
  ds.seed = c.meta.value("seed", 0ULL);
  const auto& noise = c.meta.at("noise");
  ds.noise.kind = NoiseSpec::kind_from_string(noise.at("kind").get<std::string>());
  ds.noise.rate = noise.at("rate").get<double>();
  ds.noise.parts = noise.at("parts").get<int>();
  ds.noise.probe_epochs = noise.at("probe_epochs").get<int>();
  if (ds.inputs.rows != static_cast<int>(ds.true_labels.size()) ||
      ds.inputs.rows != static_cast<int>(ds.noisy_labels.size())) {
    throw IoError("dataset arrays disagree on sample count: " + path);
  }
  return ds;
}

void export_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "id,label_noisy,label_true";
  for (int j = 0; j < ds.input_dim(); ++j) out << ",x_" << j;
  out << "\n";
  char buf[32];
  for (int i = 0; i < ds.size(); ++i) {
    out << i << "," << ds.noisy_labels[i] << "," << ds.true_labels[i];
    for (double v : ds.inputs.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace nll

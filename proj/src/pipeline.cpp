#include "nll/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "nll/checkpoint.hpp"
#include "nll/errors.hpp"
#include "nll/losses.hpp"

namespace nll {

namespace {

using Clock = std::chrono::steady_clock;

long long ms_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
}

nlohmann::json opt_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

ModelBundle ModelBundle::init(const RunConfig& cfg, int input_dim, int class_count, Rng& rng) {
  ModelBundle m;
  std::vector<int> f_dims;
  f_dims.push_back(input_dim);
  f_dims.insert(f_dims.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  f_dims.push_back(cfg.model.feature_dim);
  m.feature_extractor = Mlp::make(f_dims, rng);

  const std::vector<int> g_dims = {cfg.model.feature_dim, class_count};
  m.classifier = Mlp::make(g_dims, rng);

  const std::vector<int> h_dims = {2 * cfg.model.feature_dim, cfg.hallucinator_hidden_dim(),
                                   cfg.model.feature_dim};
  m.hallucinator = Mlp::make(h_dims, rng);
  return m;
}

nlohmann::json EpochMetrics::to_json() const {
  return {{"epoch", epoch},
          {"phase", phase},
          {"outer_iteration", outer_iteration},
          {"train_loss", train_loss},
          {"test_accuracy", test_accuracy},
          {"val_accuracy", val_accuracy},
          {"easy_precision", opt_to_json(easy_precision)},
          {"easy_recall", opt_to_json(easy_recall)},
          {"correction_accuracy", opt_to_json(correction_accuracy)},
          {"correction_coverage", opt_to_json(correction_coverage)},
          {"noise_rate", noise_rate}};
}

double evaluate_accuracy(const Mlp& extractor, const Mlp& classifier, const Dataset& ds) {
  const Matrix logits = forward(classifier, forward(extractor, ds.inputs));
  int hits = 0;
  for (int i = 0; i < logits.rows; ++i) {
    auto row = logits.row(i);
    const int pred =
        static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (pred == ds.true_labels[i]) hits++;
  }
  return ds.size() == 0 ? 0.0 : static_cast<double>(hits) / ds.size();
}

LossRecord per_sample_losses(const Mlp& extractor, const Mlp& classifier, const Dataset& ds,
                             int epoch) {
  const Matrix logits = forward(classifier, forward(extractor, ds.inputs));
  LossRecord rec;
  rec.epoch = epoch;
  rec.losses.resize(ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    rec.losses[i] = softmax_cross_entropy(logits.row(i), ds.noisy_labels[i]);
  }
  return rec;
}

Experiment::Experiment(const RunConfig& cfg) : cfg_(cfg), rng_(0) {
  cfg_.validate();
  Rng root(cfg_.seed);
  data_ = make_dataset_family(cfg_.data.blobs, cfg_.data.val_per_class, cfg_.data.test_per_class,
                              root.sub(1).seed());
  const std::uint64_t noise_seed = root.sub(2).seed();
  switch (cfg_.noise.kind) {
    case NoiseSpec::Kind::None:
      break;
    case NoiseSpec::Kind::Symmetric:
      data_.train = inject_symmetric(data_.train, cfg_.noise.rate, noise_seed);
      break;
    case NoiseSpec::Kind::Asymmetric:
      data_.train = inject_asymmetric(data_.train, cfg_.noise.rate, noise_seed);
      break;
    case NoiseSpec::Kind::FeatureDependent:
      data_.train =
          inject_feature_dependent(data_.train, cfg_.noise.rate, cfg_.noise.parts, noise_seed);
      break;
    case NoiseSpec::Kind::ClassificationBased:
      data_.train = inject_classification_based(data_.train, cfg_.noise.rate,
                                                cfg_.noise.probe_epochs, noise_seed);
      break;
  }
  realized_noise_rate_ = noise_rate(data_.train);

  Rng init_rng = root.sub(3);
  models_ = ModelBundle::init(cfg_, data_.train.input_dim(), data_.train.class_count, init_rng);
  best_models_ = models_;
  f_opt_ = OptimizerState::make(models_.feature_extractor, cfg_.train.learning_rate,
                                cfg_.train.momentum);
  g_opt_ = OptimizerState::make(models_.classifier, cfg_.train.learning_rate,
                                cfg_.train.momentum);
  rng_ = root.sub(4);
}

std::vector<double> Experiment::jitter_sigma_vector() const {
  const Matrix& x = data_.train.inputs;
  std::vector<double> sigma(x.cols, 0.0);
  for (int j = 0; j < x.cols; ++j) {
    double mean = 0.0;
    for (int i = 0; i < x.rows; ++i) mean += x(i, j);
    mean /= x.rows;
    double var = 0.0;
    for (int i = 0; i < x.rows; ++i) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    sigma[j] = cfg_.ssl.jitter_sigma * std::sqrt(var / x.rows);
  }
  return sigma;
}

void Experiment::record_epoch(const std::string& phase, int outer_iteration, double train_loss,
                              long long wall_ms) {
  global_epoch_++;
  EpochMetrics m;
  m.epoch = global_epoch_;
  m.phase = phase;
  m.outer_iteration = outer_iteration;
  m.train_loss = train_loss;
  m.test_accuracy = evaluate(data_.test);
  m.val_accuracy = evaluate(data_.val);
  m.noise_rate = realized_noise_rate_;
  if (have_artifacts_) {
    m.easy_precision = artifacts_.quality.precision;
    m.easy_recall = artifacts_.quality.recall;
    m.correction_accuracy = artifacts_.correction_accuracy;
    if (artifacts_.hard_count > 0 && cfg_.mode == RunMode::Full) {
      m.correction_coverage =
          static_cast<double>(artifacts_.corrected_count) / artifacts_.hard_count;
    }
  }
  metrics_.push_back(std::move(m));
  wall_ms_.push_back(wall_ms);
  if (metrics_.back().val_accuracy > best_val_) {
    best_val_ = metrics_.back().val_accuracy;
    best_epoch_ = global_epoch_;
    best_models_ = models_;
  }
}

LossRecord Experiment::warmup() {
  if (warmed_up_) throw UsageError("warmup: already performed");
  const Dataset& train = data_.train;
  const int n = train.size();
  const int B = cfg_.train.batch_size;
  for (int epoch = 0; epoch < cfg_.train.warmup_epochs; ++epoch) {
    const auto t0 = Clock::now();
    auto perm = rng_.permutation(static_cast<std::size_t>(n));
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += B) {
      const int b = std::min(B, n - start);
      Matrix xb(b, train.input_dim());
      std::vector<int> yb(b);
      for (int i = 0; i < b; ++i) {
        const int src = static_cast<int>(perm[start + i]);
        std::copy(train.inputs.row(src).begin(), train.inputs.row(src).end(), xb.row(i).begin());
        yb[i] = train.noisy_labels[src];
      }
      ForwardCache f_cache, g_cache;
      const Matrix features = forward(models_.feature_extractor, xb, f_cache);
      const Matrix logits = forward(models_.classifier, features, g_cache);
      Matrix dlogits;
      loss_sum += b * ce_batch_with_grad(logits, yb, dlogits);
      GradientBundle g_grads, f_grads;
      const Matrix dfeatures = backward(models_.classifier, g_cache, dlogits, g_grads);
      backward(models_.feature_extractor, f_cache, dfeatures, f_grads);
      sgd_step(models_.classifier, g_grads, g_opt_);
      sgd_step(models_.feature_extractor, f_grads, f_opt_);
    }
    record_epoch("warmup", 0, loss_sum / n, ms_since(t0));
  }
  warmed_up_ = true;
  return per_sample_losses(models_.feature_extractor, models_.classifier, train, global_epoch_);
}

PhaseArtifacts Experiment::classification_phase(int outer_iteration) {
  if (!warmed_up_) throw UsageError("classification_phase: warm-up has not run");
  const Dataset& train = data_.train;
  const int n = train.size();
  const int C = train.class_count;
  const int D = train.input_dim();
  const auto t_phase = Clock::now();

  // (1) easy sample selection from the current loss distribution
  const LossRecord rec =
      per_sample_losses(models_.feature_extractor, models_.classifier, train, global_epoch_);
  const GmmFit fit = fit_gmm2(rec);
  const std::vector<double> easiness = easiness_scores(fit);

  PhaseArtifacts art;
  art.split = (cfg_.mode == RunMode::Baseline)
                  ? threshold_split(train, easiness, 0.5)
                  : class_balanced_split(train, easiness, cfg_.percent_easy);
  art.quality = selection_quality(art.split, train);
  art.hard_count = static_cast<int>(art.split.hard.size());

  // (2) anchor hallucination and (3) hard-sample correction, full mode only
  std::vector<int> corrected_ids, corrected_labels;
  std::vector<double> corrected_conf;
  std::vector<int> residual_ids(art.split.hard.begin(), art.split.hard.end());
  if (cfg_.mode == RunMode::Full && !art.split.hard.empty()) {
    const FeatureSet easy_feats =
        embed_features(models_.feature_extractor, train, art.split.easy, "easy");
    const FeatureSet hard_feats =
        embed_features(models_.feature_extractor, train, art.split.hard, "hard");
    const auto pairs = sample_pairs(easy_feats, cfg_.anchors_per_sample, rng_);
    const AnchorSet anchors = make_anchors(models_.hallucinator, easy_feats, pairs, cfg_.lambda_p);
    const CorrectionResult corr = correct_hard(anchors, hard_feats, cfg_.lambda_conf,
                                               cfg_.max_representatives, cfg_.confidence_floor);
    art.corrected_count = static_cast<int>(corr.corrected.size());
    residual_ids.clear();
    for (int row : corr.residual) residual_ids.push_back(hard_feats.source_indices[row]);
    int correct_votes = 0;
    for (std::size_t k = 0; k < corr.corrected.size(); ++k) {
      const int id = hard_feats.source_indices[corr.corrected[k]];
      corrected_ids.push_back(id);
      corrected_labels.push_back(corr.voted_labels[k]);
      corrected_conf.push_back(corr.confidences[k]);
      if (corr.voted_labels[k] == train.true_labels[id]) correct_votes++;
    }
    if (!corr.corrected.empty()) {
      art.correction_accuracy = static_cast<double>(correct_votes) / corr.corrected.size();
    }
  }

  // (4) semi-supervised training set assembly
  struct LabeledEntry {
    int id;
    int label;
    double weight;
  };
  std::vector<LabeledEntry> labeled;
  labeled.reserve(art.split.easy.size() + corrected_ids.size());
  for (int i : art.split.easy) labeled.push_back({i, train.noisy_labels[i], art.split.scores[i]});
  for (std::size_t k = 0; k < corrected_ids.size(); ++k) {
    labeled.push_back({corrected_ids[k], corrected_labels[k], corrected_conf[k]});
  }
  std::sort(labeled.begin(), labeled.end(),
            [](const LabeledEntry& a, const LabeledEntry& b) { return a.id < b.id; });
  std::sort(residual_ids.begin(), residual_ids.end());

  for (const auto& e : labeled) art.labeled_indices.push_back(e.id);
  art.unlabeled_indices = residual_ids;

  // partition bookkeeping: labeled and unlabeled tile the train set
  {
    std::vector<int> seen(n, 0);
    for (int i : art.labeled_indices) seen[i]++;
    for (int i : art.unlabeled_indices) seen[i]++;
    for (int i = 0; i < n; ++i) {
      if (seen[i] != 1) throw UsageError("classification_phase: partition bookkeeping violated");
    }
  }

  const int nl = static_cast<int>(labeled.size());
  const int nu = static_cast<int>(residual_ids.size());
  Matrix labeled_x(nl, D);
  std::vector<int> labeled_y(nl);
  std::vector<double> labeled_w(nl);
  for (int i = 0; i < nl; ++i) {
    std::copy(train.inputs.row(labeled[i].id).begin(), train.inputs.row(labeled[i].id).end(),
              labeled_x.row(i).begin());
    labeled_y[i] = labeled[i].label;
    labeled_w[i] = std::clamp(labeled[i].weight, 0.0, 1.0);
  }
  Matrix unlabeled_x(nu, D);
  for (int i = 0; i < nu; ++i) {
    std::copy(train.inputs.row(residual_ids[i]).begin(), train.inputs.row(residual_ids[i]).end(),
              unlabeled_x.row(i).begin());
  }
  const std::vector<double> sigma = jitter_sigma_vector();
  const int B = cfg_.train.batch_size;

  artifacts_ = art;
  have_artifacts_ = true;

  long long phase_ms = ms_since(t_phase);  // selection/correction cost charged to first epoch
  for (int epoch = 0; epoch < cfg_.train.classification_epochs; ++epoch) {
    const auto t0 = Clock::now();
    ssl_epochs_seen_++;
    const double ramp = cfg_.ssl.ramp_epochs <= 0
                            ? 1.0
                            : std::min(1.0, static_cast<double>(ssl_epochs_seen_) /
                                                cfg_.ssl.ramp_epochs);
    const double lambda_eff = cfg_.ssl.lambda_mse * ramp;

    double loss_sum = 0.0;
    int batch_count = 0;
    auto run_batch = [&](const Matrix& lx, std::span<const int> ly, std::span<const double> lw,
                         const Matrix& ux) {
      const SslBatch batch = build_ssl_batch(models_.feature_extractor, models_.classifier, lx,
                                             ly, lw, C, ux, sigma, cfg_.ssl, rng_);
      GradientBundle f_grads, g_grads;
      loss_sum += ssl_loss(models_.feature_extractor, models_.classifier, batch, lambda_eff,
                           &f_grads, &g_grads);
      batch_count++;
      sgd_step(models_.feature_extractor, f_grads, f_opt_);
      sgd_step(models_.classifier, g_grads, g_opt_);
    };

    if (nl > 0) {
      auto lperm = rng_.permutation(static_cast<std::size_t>(nl));
      std::vector<std::size_t> uperm;
      if (nu > 0) uperm = rng_.permutation(static_cast<std::size_t>(nu));
      std::size_t ucur = 0;
      for (int start = 0; start < nl; start += B) {
        const int b = std::min(B, nl - start);
        Matrix lx(b, D);
        std::vector<int> ly(b);
        std::vector<double> lw(b);
        for (int i = 0; i < b; ++i) {
          const int src = static_cast<int>(lperm[start + i]);
          std::copy(labeled_x.row(src).begin(), labeled_x.row(src).end(), lx.row(i).begin());
          ly[i] = labeled_y[src];
          lw[i] = labeled_w[src];
        }
        const int ub = nu > 0 ? b : 0;
        Matrix ux(ub, D);
        for (int i = 0; i < ub; ++i) {
          const int src = static_cast<int>(uperm[ucur % nu]);
          ucur++;
          std::copy(unlabeled_x.row(src).begin(), unlabeled_x.row(src).end(), ux.row(i).begin());
        }
        run_batch(lx, ly, lw, ux);
      }
    } else if (nu > 0) {
      auto uperm = rng_.permutation(static_cast<std::size_t>(nu));
      for (int start = 0; start < nu; start += B) {
        const int b = std::min(B, nu - start);
        Matrix ux(b, D);
        for (int i = 0; i < b; ++i) {
          const int src = static_cast<int>(uperm[start + i]);
          std::copy(unlabeled_x.row(src).begin(), unlabeled_x.row(src).end(), ux.row(i).begin());
        }
        run_batch(Matrix(0, D), {}, {}, ux);
      }
    }

    const double mean_loss = batch_count > 0 ? loss_sum / batch_count : 0.0;
    record_epoch("classification", outer_iteration, mean_loss, phase_ms + ms_since(t0));
    phase_ms = 0;
  }
  return artifacts_;
}

std::vector<double> Experiment::hallucinator_phase(int outer_iteration) {
  if (!have_artifacts_) {
    throw UsageError("hallucinator_phase: no classification phase has run");
  }
  const auto t0 = Clock::now();
  const FeatureSet easy_feats = embed_features(models_.feature_extractor, data_.train,
                                               artifacts_.split.easy, "easy");
  HallTrainConfig hall_cfg;
  hall_cfg.epochs = cfg_.train.hallucinator_epochs;
  hall_cfg.lr = cfg_.train.hallucinator_learning_rate;
  hall_cfg.momentum = cfg_.train.momentum;
  hall_cfg.batch_size = cfg_.train.batch_size;
  hall_cfg.anchors_per_sample = cfg_.anchors_per_sample;
  hall_cfg.lambda_p = cfg_.lambda_p;
  const std::vector<double> curve =
      train_hallucinator(models_.hallucinator, models_.classifier, easy_feats, hall_cfg, rng_);

  const long long total_ms = ms_since(t0);
  const long long per_epoch = total_ms / cfg_.train.hallucinator_epochs;
  for (int e = 0; e < cfg_.train.hallucinator_epochs; ++e) {
    const long long ms =
        e + 1 == cfg_.train.hallucinator_epochs
            ? total_ms - per_epoch * (cfg_.train.hallucinator_epochs - 1)
            : per_epoch;
    record_epoch("hallucinator", outer_iteration, curve[e], ms);
  }
  return curve;
}

double Experiment::evaluate(const Dataset& split) const {
  return evaluate_accuracy(models_.feature_extractor, models_.classifier, split);
}

RunResult run_experiment(const RunConfig& cfg, const std::string& out_dir, bool quiet) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
  const std::string timing_path = (fs::path(out_dir) / "timing.log").string();
  const std::string ckpt_path = (fs::path(out_dir) / "best.ckpt").string();
  const std::string summary_path = (fs::path(out_dir) / "summary.json").string();

  Experiment exp(cfg);
  std::ofstream metrics_out(metrics_path);
  std::ofstream timing_out(timing_path);
  if (!metrics_out || !timing_out) throw IoError("cannot write into " + out_dir);

  std::size_t flushed = 0;
  auto flush_metrics = [&]() {
    const auto& rows = exp.metrics();
    const auto& wall = exp.epoch_wall_ms();
    for (; flushed < rows.size(); ++flushed) {
      metrics_out << rows[flushed].to_json().dump() << "\n";
      timing_out << rows[flushed].epoch << " " << rows[flushed].phase << " " << wall[flushed]
                 << "\n";
      if (!quiet) {
        std::cout << "[" << rows[flushed].epoch << "] " << rows[flushed].phase
                  << " loss=" << rows[flushed].train_loss
                  << " val=" << rows[flushed].val_accuracy
                  << " test=" << rows[flushed].test_accuracy << "\n";
      }
    }
    metrics_out.flush();
    timing_out.flush();
  };

  exp.warmup();
  flush_metrics();
  for (int iter = 1; iter <= cfg.train.outer_iterations; ++iter) {
    exp.classification_phase(iter);
    flush_metrics();
    if (cfg.mode == RunMode::Full) {
      exp.hallucinator_phase(iter);
      flush_metrics();
    }
  }

  const ModelBundle& best = exp.best_models();
  save_checkpoint(ckpt_path,
                  {{"feature_extractor", &best.feature_extractor},
                   {"classifier", &best.classifier},
                   {"hallucinator", &best.hallucinator}},
                  cfg.hash());

  const double test_at_best =
      evaluate_accuracy(best.feature_extractor, best.classifier, exp.dataset().test);
  const auto& rows = exp.metrics();
  const std::optional<double> last_precision =
      rows.empty() ? std::optional<double>{} : rows.back().easy_precision;
  const std::optional<double> last_corr_acc =
      rows.empty() ? std::optional<double>{} : rows.back().correction_accuracy;
  const std::optional<double> last_coverage =
      rows.empty() ? std::optional<double>{} : rows.back().correction_coverage;

  nlohmann::json summary = {
      {"config_hash", cfg.hash()},
      {"mode", run_mode_to_string(cfg.mode)},
      {"seed", cfg.seed},
      {"total_epochs", rows.empty() ? 0 : rows.back().epoch},
      {"best_val_accuracy", exp.best_val_accuracy()},
      {"best_epoch", exp.best_epoch()},
      {"test_accuracy_at_best", test_at_best},
      {"final_test_accuracy", rows.empty() ? 0.0 : rows.back().test_accuracy},
      {"realized_noise_rate", noise_rate(exp.dataset().train)},
      {"easy_precision", opt_to_json(last_precision)},
      {"correction_accuracy", opt_to_json(last_corr_acc)},
      {"correction_coverage", opt_to_json(last_coverage)},
      {"checkpoint", "best.ckpt"},
      {"config", cfg.to_json()},
  };
  std::ofstream summary_out(summary_path);
  summary_out << summary.dump(2) << "\n";
  if (!summary_out) throw IoError("cannot write " + summary_path);

  if (!quiet) {
    std::cout << "best val " << exp.best_val_accuracy() << " (epoch " << exp.best_epoch()
              << "), test at best " << test_at_best << "\n";
  }
  return {summary, metrics_path, ckpt_path};
}

}  // namespace nll

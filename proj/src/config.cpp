#include "nll/config.hpp"

#include <cstdio>
#include <fstream>

#include "nll/errors.hpp"

namespace nll {

RunMode run_mode_from_string(const std::string& s) {
  if (s == "baseline") return RunMode::Baseline;
  if (s == "easy-only") return RunMode::EasyOnly;
  if (s == "full") return RunMode::Full;
  throw ValidationError("unknown mode '" + s + "' (expected baseline|easy-only|full)");
}

std::string run_mode_to_string(RunMode m) {
  switch (m) {
    case RunMode::Baseline: return "baseline";
    case RunMode::EasyOnly: return "easy-only";
    case RunMode::Full: return "full";
  }
  return "full";
}

namespace {

void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError("config: unknown key '" + where + it.key() + "'");
  }
}

template <class T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config: bad value for '") + key + "'");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"seed", "mode", "dataset", "noise", "model", "train", "selection",
                 "hallucinator", "correction", "ssl"},
             "");
  RunConfig cfg;
  if (!j.contains("seed")) throw ValidationError("config: seed is mandatory");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.mode = run_mode_from_string(get_or<std::string>(j, "mode", "full"));

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, {"classes", "per_class", "input_dim", "overlap", "hard_frac", "val_per_class",
                   "test_per_class"},
               "dataset.");
    cfg.data.blobs.classes = get_or(d, "classes", cfg.data.blobs.classes);
    cfg.data.blobs.per_class = get_or(d, "per_class", cfg.data.blobs.per_class);
    cfg.data.blobs.input_dim = get_or(d, "input_dim", cfg.data.blobs.input_dim);
    cfg.data.blobs.overlap = get_or(d, "overlap", cfg.data.blobs.overlap);
    cfg.data.blobs.hard_frac = get_or(d, "hard_frac", cfg.data.blobs.hard_frac);
    cfg.data.val_per_class = get_or(d, "val_per_class", cfg.data.val_per_class);
    cfg.data.test_per_class = get_or(d, "test_per_class", cfg.data.test_per_class);
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, {"kind", "rate", "parts", "probe_epochs"}, "noise.");
    cfg.noise.kind = NoiseSpec::kind_from_string(get_or<std::string>(n, "kind", "none"));
    cfg.noise.rate = get_or(n, "rate", cfg.noise.rate);
    cfg.noise.parts = get_or(n, "parts", cfg.noise.parts);
    cfg.noise.probe_epochs = get_or(n, "probe_epochs", cfg.noise.probe_epochs);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"feature_dim", "hidden", "hallucinator_hidden"}, "model.");
    cfg.model.feature_dim = get_or(m, "feature_dim", cfg.model.feature_dim);
    cfg.model.hidden = get_or(m, "hidden", cfg.model.hidden);
    cfg.model.hallucinator_hidden = get_or(m, "hallucinator_hidden", cfg.model.hallucinator_hidden);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, {"warmup_epochs", "outer_iterations", "classification_epochs",
                   "hallucinator_epochs", "batch_size", "learning_rate", "momentum",
                   "hallucinator_learning_rate"},
               "train.");
    cfg.train.warmup_epochs = get_or(t, "warmup_epochs", cfg.train.warmup_epochs);
    cfg.train.outer_iterations = get_or(t, "outer_iterations", cfg.train.outer_iterations);
    cfg.train.classification_epochs =
        get_or(t, "classification_epochs", cfg.train.classification_epochs);
    cfg.train.hallucinator_epochs = get_or(t, "hallucinator_epochs", cfg.train.hallucinator_epochs);
    cfg.train.batch_size = get_or(t, "batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = get_or(t, "learning_rate", cfg.train.learning_rate);
    cfg.train.momentum = get_or(t, "momentum", cfg.train.momentum);
    cfg.train.hallucinator_learning_rate =
        get_or(t, "hallucinator_learning_rate", cfg.train.hallucinator_learning_rate);
  }

  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    check_keys(s, {"P"}, "selection.");
    cfg.percent_easy = get_or(s, "P", cfg.percent_easy);
  }

  if (j.contains("hallucinator")) {
    const auto& h = j.at("hallucinator");
    check_keys(h, {"lambda_p", "anchors_per_sample"}, "hallucinator.");
    cfg.lambda_p = get_or(h, "lambda_p", cfg.lambda_p);
    cfg.anchors_per_sample = get_or(h, "anchors_per_sample", cfg.anchors_per_sample);
  }

  if (j.contains("correction")) {
    const auto& c = j.at("correction");
    check_keys(c, {"lambda_conf", "K", "confidence_floor"}, "correction.");
    cfg.lambda_conf = get_or(c, "lambda_conf", cfg.lambda_conf);
    cfg.max_representatives = get_or(c, "K", cfg.max_representatives);
    cfg.confidence_floor = get_or(c, "confidence_floor", cfg.confidence_floor);
  }

  if (j.contains("ssl")) {
    const auto& s = j.at("ssl");
    check_keys(s, {"lambda_mse", "ramp_epochs", "temperature", "alpha", "jitter_sigma", "mixup",
                   "sharpen"},
               "ssl.");
    cfg.ssl.lambda_mse = get_or(s, "lambda_mse", cfg.ssl.lambda_mse);
    cfg.ssl.ramp_epochs = get_or(s, "ramp_epochs", cfg.ssl.ramp_epochs);
    cfg.ssl.temperature = get_or(s, "temperature", cfg.ssl.temperature);
    cfg.ssl.alpha = get_or(s, "alpha", cfg.ssl.alpha);
    cfg.ssl.jitter_sigma = get_or(s, "jitter_sigma", cfg.ssl.jitter_sigma);
    cfg.ssl.mixup = get_or(s, "mixup", cfg.ssl.mixup);
    cfg.ssl.sharpen = get_or(s, "sharpen", cfg.ssl.sharpen);
  }

  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config: invalid JSON in " + path);
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"seed", seed},
      {"mode", run_mode_to_string(mode)},
      {"dataset",
       {{"classes", data.blobs.classes},
        {"per_class", data.blobs.per_class},
        {"input_dim", data.blobs.input_dim},
        {"overlap", data.blobs.overlap},
        {"hard_frac", data.blobs.hard_frac},
        {"val_per_class", data.val_per_class},
        {"test_per_class", data.test_per_class}}},
      {"noise",
       {{"kind", NoiseSpec::kind_to_string(noise.kind)},
        {"rate", noise.rate},
        {"parts", noise.parts},
        {"probe_epochs", noise.probe_epochs}}},
      {"model",
       {{"feature_dim", model.feature_dim},
        {"hidden", model.hidden},
        {"hallucinator_hidden", model.hallucinator_hidden}}},
      {"train",
       {{"warmup_epochs", train.warmup_epochs},
        {"outer_iterations", train.outer_iterations},
        {"classification_epochs", train.classification_epochs},
        {"hallucinator_epochs", train.hallucinator_epochs},
        {"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"momentum", train.momentum},
        {"hallucinator_learning_rate", train.hallucinator_learning_rate}}},
      {"selection", {{"P", percent_easy}}},
      {"hallucinator", {{"lambda_p", lambda_p}, {"anchors_per_sample", anchors_per_sample}}},
      {"correction",
       {{"lambda_conf", lambda_conf},
        {"K", max_representatives},
        {"confidence_floor", confidence_floor}}},
      {"ssl",
       {{"lambda_mse", ssl.lambda_mse},
        {"ramp_epochs", ssl.ramp_epochs},
        {"temperature", ssl.temperature},
        {"alpha", ssl.alpha},
        {"jitter_sigma", ssl.jitter_sigma},
        {"mixup", ssl.mixup},
        {"sharpen", ssl.sharpen}}},
  };
}

std::string RunConfig::hash() const {
  const std::string dump = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  if (data.blobs.classes < 2) throw ValidationError("config: dataset.classes must be >= 2");
  if (data.blobs.per_class < 1 || data.val_per_class < 1 || data.test_per_class < 1) {
    throw ValidationError("config: split sizes must be positive");
  }
  if (data.blobs.input_dim < 1) throw ValidationError("config: dataset.input_dim must be >= 1");
  if (data.blobs.overlap < 0.0 || data.blobs.overlap > 1.0) {
    throw ValidationError("config: dataset.overlap must be in [0, 1]");
  }
  if (data.blobs.hard_frac < 0.0 || data.blobs.hard_frac > 1.0) {
    throw ValidationError("config: dataset.hard_frac must be in [0, 1]");
  }
  if (noise.rate < 0.0 || noise.rate >= 1.0) {
    throw ValidationError("config: noise.rate must be in [0, 1)");
  }
  if (noise.kind == NoiseSpec::Kind::FeatureDependent &&
      (noise.parts < 1 || noise.parts > data.blobs.input_dim)) {
    throw ValidationError("config: noise.parts must be in [1, input_dim]");
  }
  if (noise.kind == NoiseSpec::Kind::ClassificationBased && noise.probe_epochs < 1) {
    throw ValidationError("config: noise.probe_epochs must be >= 1");
  }
  if (model.feature_dim < 1) throw ValidationError("config: model.feature_dim must be >= 1");
  for (int hdim : model.hidden) {
    if (hdim < 1) throw ValidationError("config: model.hidden dims must be positive");
  }
  if (model.hallucinator_hidden < 0) {
    throw ValidationError("config: model.hallucinator_hidden must be >= 0");
  }
  if (train.warmup_epochs < 1) throw ValidationError("config: train.warmup_epochs must be >= 1");
  if (train.outer_iterations < 0) {
    throw ValidationError("config: train.outer_iterations must be >= 0");
  }
  if (train.classification_epochs < 1 || train.hallucinator_epochs < 1) {
    throw ValidationError("config: phase epoch counts must be >= 1");
  }
  if (train.batch_size < 1) throw ValidationError("config: train.batch_size must be >= 1");
  if (train.learning_rate < 0.0 || train.hallucinator_learning_rate < 0.0) {
    throw ValidationError("config: learning rates must be >= 0");
  }
  if (train.momentum < 0.0 || train.momentum >= 1.0) {
    throw ValidationError("config: train.momentum must be in [0, 1)");
  }
  if (percent_easy <= 0.0 || percent_easy > 100.0) {
    throw ValidationError("config: selection.P must be in (0, 100]");
  }
  if (lambda_p < 0.5 || lambda_p > 1.0) {
    throw ValidationError("config: hallucinator.lambda_p must be in [0.5, 1.0]");
  }
  if (anchors_per_sample < 1) {
    throw ValidationError("config: hallucinator.anchors_per_sample must be >= 1");
  }
  if (lambda_conf <= -1.0 || lambda_conf >= 1.0) {
    throw ValidationError("config: correction.lambda_conf must be in (-1, 1)");
  }
  if (max_representatives < 1) throw ValidationError("config: correction.K must be >= 1");
  if (confidence_floor < 0.0 || confidence_floor > 1.0) {
    throw ValidationError("config: correction.confidence_floor must be in [0, 1]");
  }
  ssl.validate();
}

}  // namespace nll

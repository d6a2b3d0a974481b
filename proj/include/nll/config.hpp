#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nll/data.hpp"
#include "nll/ssl.hpp"

namespace nll {

enum class RunMode { Baseline, EasyOnly, Full };
RunMode run_mode_from_string(const std::string& s);
std::string run_mode_to_string(RunMode m);

struct DataConfig {
  BlobSpec blobs;
  int val_per_class = 50;
  int test_per_class = 125;
};

struct ModelConfig {
  int feature_dim = 16;
  std::vector<int> hidden = {64, 32};
  int hallucinator_hidden = 0;  // 0 means 2 * feature_dim
};

struct TrainConfig {
  int warmup_epochs = 10;
  int outer_iterations = 5;
  int classification_epochs = 10;
  int hallucinator_epochs = 5;
  int batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double hallucinator_learning_rate = 0.01;
};

/// Everything one experiment run depends on. The JSON config file maps
/// one-to-one onto these fields; unknown keys are an error and the seed is
/// mandatory.
struct RunConfig {
  std::uint64_t seed = 0;
  RunMode mode = RunMode::Full;
  DataConfig data;
  NoiseSpec noise;
  ModelConfig model;
  TrainConfig train;
  double percent_easy = 60.0;      // P, the class-balanced easy percentage
  double lambda_p = 0.75;          // anchor difficulty
  int anchors_per_sample = 4;      // A
  double lambda_conf = 0.8;        // representative validity threshold
  int max_representatives = 10;    // K
  double confidence_floor = 0.5;   // votes below this abstain
  SslConfig ssl;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;

  /// FNV-1a over the canonical JSON dump; identifies checkpoints.
  std::string hash() const;

  void validate() const;
  int hallucinator_hidden_dim() const {
    return model.hallucinator_hidden > 0 ? model.hallucinator_hidden : 2 * model.feature_dim;
  }
};

}  // namespace nll

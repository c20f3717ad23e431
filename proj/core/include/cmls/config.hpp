#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmls/acoustic_encoder.hpp"
#include "cmls/adversarial.hpp"
#include "cmls/losses.hpp"
#include "cmls/mfcc.hpp"
#include "cmls/optimizer.hpp"
#include "cmls/sampler.hpp"
#include "cmls/schedule.hpp"

namespace cmls {

struct DataConfig {
  std::filesystem::path train_manifest;
  std::filesystem::path valid_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path vocab;          // optional; inferred from train when empty
  std::filesystem::path feature_cache;  // optional
  int num_workers = 1;
};

struct TextEncoderConfig {
  std::string model = "bert-base-cased";
  bool fine_tune = false;
};

struct OptimizerConfig {
  AdamConfig adam;
  double lr_acoustic = 1e-3;
  double lr_text = 2e-5;
  double lr_discriminator = 1e-3;
  ScheduleConfig schedule;

  void validate() const;
};

struct TrainingConfig {
  int batch_size = 64;
  int max_epochs = 50;
  int patience = 7;
  double min_delta = 1e-4;
  double max_grad_norm = 0.0;  // 0 disables clipping
  std::filesystem::path output_dir = "runs/default";

  void validate() const;
};

/// Every knob of a run. Precedence when loading: struct defaults < profile <
/// config file < `key=value` overrides.
struct RunConfig {
  std::string profile = "fsc";
  std::uint64_t seed = 1;
  DataConfig data;
  FeatureConfig features;
  AcousticEncoderConfig acoustic;
  TextEncoderConfig text;
  LossConfig loss;
  MiningStrategy mining = MiningStrategy::uniform;
  DiscriminatorConfig discriminator;
  OptimizerConfig optimizer;
  TrainingConfig training;

  /// Whether training needs text embeddings at all.
  bool uses_text() const;
  void validate() const;
  std::string to_yaml() const;
  std::uint64_t hash() const;
};

/// Names accepted by the `profile` key.
std::vector<std::string> profile_names();
RunConfig profile_defaults(const std::string& name);

/// Parses YAML text. Relative paths are resolved against base_dir; paths given
/// in overrides are resolved against the current directory. Unknown keys and
/// malformed values raise ValidationError.
RunConfig parse_run_config(const std::string& yaml_text, std::span<const std::string> overrides = {},
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

}  // namespace cmls

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cmls/checkpoint.hpp"
#include "cmls/config.hpp"
#include "cmls/feature_cache.hpp"
#include "cmls/manifest.hpp"
#include "cmls/text_encoder.hpp"

namespace cmls {

/// Records of one split with their features and class indices, index-aligned.
struct LabeledFeatures {
  std::vector<UtteranceRecord> records;
  std::vector<FeatureSequence> features;
  std::vector<int> labels;

  std::size_t size() const { return records.size(); }
};

LabeledFeatures load_split(const std::filesystem::path& manifest, const IntentVocab& vocab, const FeatureConfig& cfg,
                           const FeatureCache* cache = nullptr, int num_workers = 1);

/// One line of the metrics log. Components are means over the epoch's batches;
/// discriminator fields are NaN unless coupling is adversarial.
struct EpochMetrics {
  int epoch = 0;
  double ce_acoustic = 0.0;
  double ce_text = 0.0;
  double coupling = 0.0;
  double train_loss = 0.0;
  double discriminator_loss = 0.0;
  double discriminator_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
  double lr_acoustic = 0.0;
  bool improved = false;
  double seconds = 0.0;

  /// JSON object on one line; `seconds` is left out so logs of identical runs compare equal.
  std::string to_json() const;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochMetrics> history;
  std::filesystem::path checkpoint_path;  // empty when outputs are disabled
  bool stopped_early = false;
};

struct TrainOptions {
  /// Write config.yaml, metrics.jsonl and best.ckpt under training.output_dir.
  bool write_outputs = true;
  std::function<void(const EpochMetrics&)> on_epoch;
  /// Used instead of resolving cfg.text.model; must outlive the call. Its
  /// parameters' trainable flags are set from cfg.text.fine_tune.
  TextEncoder* text_encoder = nullptr;
};

/// Loads the manifests named in cfg.data, extracts (or loads cached) features and trains.
TrainResult train(const RunConfig& cfg, const TrainOptions& options = {});

/// Trains on already-loaded splits. The text encoder is constructed only when
/// cfg.uses_text(). Throws ValidationError on an empty training split and
/// DivergenceError on a non-finite loss; the best checkpoint written so far is kept.
TrainResult train(const RunConfig& cfg, const IntentVocab& vocab, const LabeledFeatures& train_split,
                  const LabeledFeatures& valid_split, const TrainOptions& options = {});

}  // namespace cmls

#pragma once

#include <span>
#include <vector>

#include "cmls/acoustic_encoder.hpp"
#include "cmls/manifest.hpp"
#include "cmls/mfcc.hpp"

namespace cmls {

/// Everything needed at inference time: features in, intent out. The text
/// branch is not part of it.
struct SluModel {
  IntentVocab vocab;
  FeatureConfig features;
  FeatureNormalizer normalizer;
  AcousticEncoder encoder;
  IntentClassifier classifier;

  SluModel() = default;
  SluModel(IntentVocab vocab, FeatureConfig features, AcousticEncoderConfig acoustic, Rng& rng);

  /// Normalized, padded batch over the given sequences.
  PaddedBatch make_batch(std::span<const FeatureSequence* const> sequences) const;

  /// Acoustic embeddings, one row per sequence.
  Matrix embed(std::span<const FeatureSequence> sequences, int batch_size = 64) const;
  Matrix predict_proba(std::span<const FeatureSequence> sequences, int batch_size = 64) const;
  std::vector<int> predict(std::span<const FeatureSequence> sequences, int batch_size = 64) const;

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;
};

}  // namespace cmls

#pragma once

#include <array>
#include <span>
#include <vector>

#include "cmls/autograd.hpp"
#include "cmls/layers.hpp"
#include "cmls/mfcc.hpp"

namespace cmls {

struct AcousticEncoderConfig {
  int num_layers = 4;
  int hidden_units = 512;  // per direction
  int input_dim = 40;
  int output_dim = kEmbeddingDim;
  bool bidirectional = true;

  int state_dim() const { return bidirectional ? 2 * hidden_units : hidden_units; }
  void validate() const;
};

/// Variable-length sequences stacked time-major: row t * batch + b holds frame
/// t of sequence b; rows with t >= lengths[b] are zero padding.
struct PaddedBatch {
  Matrix data;
  std::vector<int> lengths;
  int max_length = 0;

  int batch_size() const { return static_cast<int>(lengths.size()); }
  int feature_dim() const { return static_cast<int>(data.cols()); }

  /// Throws ValidationError on an empty batch, a zero-length sequence or mixed widths.
  static PaddedBatch from_sequences(std::span<const Matrix* const> sequences);
  static PaddedBatch from_sequences(std::span<const Matrix> sequences);
};

/// Per-coefficient standardization fitted on training features.
struct FeatureNormalizer {
  RowVector mean;
  RowVector inv_std;

  static FeatureNormalizer identity(int dim);
  static FeatureNormalizer fit(std::span<const FeatureSequence> sequences);
  Matrix apply(const Matrix& frames) const;
};

/// Weights of one LSTM direction; gate order is input, forget, cell, output.
struct LstmWeights {
  Parameter w_input;      // in x 4H
  Parameter w_recurrent;  // H x 4H
  Parameter bias;         // 1 x 4H
};

/// One LSTM direction over a PaddedBatch layout. Padded steps carry the
/// previous state unchanged and emit zeros, so a reverse pass starts at each
/// sequence's own last valid frame.
ag::Var lstm_direction(ag::Var inputs, std::span<const int> lengths, int max_length, ag::Var w_input,
                       ag::Var w_recurrent, ag::Var bias, bool reverse);

/// out(b, f) = max over valid t of states(t * B + b, f). Padding never takes part.
ag::Var masked_max_pool(ag::Var states, std::span<const int> lengths, int max_length);

/// Multi-layer (Bi-)LSTM, temporal max-pooling over valid frames, and a
/// linear projection from the pooled state to the shared embedding space.
class AcousticEncoder {
 public:
  AcousticEncoder() = default;
  AcousticEncoder(AcousticEncoderConfig cfg, Rng& rng);

  const AcousticEncoderConfig& config() const { return cfg_; }

  /// Last-layer states, (T * B) x state_dim.
  ag::Var states(ag::Tape& tape, const PaddedBatch& batch) const;
  /// Pooled last-layer states, B x state_dim.
  ag::Var pooled(ag::Tape& tape, const PaddedBatch& batch) const;
  /// Acoustic embeddings, B x output_dim.
  ag::Var forward(ag::Tape& tape, const PaddedBatch& batch) const;
  /// Forward pass without recording.
  Matrix embed(const PaddedBatch& batch) const;

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

 private:
  AcousticEncoderConfig cfg_;
  std::vector<std::vector<LstmWeights>> layers_;  // [layer][direction]
  Linear projection_;
};

struct ClassifierConfig {
  int input_dim = kEmbeddingDim;
  int num_intents = 2;
  void validate() const;
};

/// Shared intent head: one fully-connected layer followed by softmax, applied
/// to acoustic and text embeddings alike.
class IntentClassifier {
 public:
  IntentClassifier() = default;
  IntentClassifier(ClassifierConfig cfg, Rng& rng);
  static IntentClassifier zeros(ClassifierConfig cfg);

  const ClassifierConfig& config() const { return cfg_; }
  ag::Var logits(ag::Tape& tape, ag::Var embeddings) const;
  /// Row-wise probabilities for a batch of embeddings.
  Matrix probabilities(const Matrix& embeddings) const;
  /// Probability vector for one embedding.
  Vector classify(const Vector& embedding) const;

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

 private:
  ClassifierConfig cfg_;
  Linear layer_;
};

}  // namespace cmls

#include "cmls/model.hpp"

#include <algorithm>

#include "cmls/errors.hpp"

namespace cmls {

SluModel::SluModel(IntentVocab v, FeatureConfig f, AcousticEncoderConfig acoustic, Rng& rng)
    : vocab(std::move(v)), features(f), normalizer(FeatureNormalizer::identity(f.num_mfcc)) {
  acoustic.input_dim = f.num_mfcc;
  encoder = AcousticEncoder(acoustic, rng);
  classifier = IntentClassifier(ClassifierConfig{acoustic.output_dim, static_cast<int>(vocab.size())}, rng);
}

PaddedBatch SluModel::make_batch(std::span<const FeatureSequence* const> sequences) const {
  std::vector<Matrix> frames;
  frames.reserve(sequences.size());
  for (const FeatureSequence* s : sequences) frames.push_back(normalizer.apply(s->frames));
  return PaddedBatch::from_sequences(std::span<const Matrix>(frames));
}

Matrix SluModel::embed(std::span<const FeatureSequence> sequences, int batch_size) const {
  if (batch_size < 1) throw ValidationError("embed: batch_size must be >= 1");
  Matrix out(static_cast<Eigen::Index>(sequences.size()), encoder.config().output_dim);
  for (std::size_t start = 0; start < sequences.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(sequences.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const FeatureSequence*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&sequences[i]);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        encoder.embed(make_batch(ptrs));
  }
  return out;
}

Matrix SluModel::predict_proba(std::span<const FeatureSequence> sequences, int batch_size) const {
  return classifier.probabilities(embed(sequences, batch_size));
}

std::vector<int> SluModel::predict(std::span<const FeatureSequence> sequences, int batch_size) const {
  const Matrix p = predict_proba(sequences, batch_size);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index k = 0;
    p.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

ParameterRefs SluModel::parameters() {
  ParameterRefs out = encoder.parameters();
  for (Parameter* p : classifier.parameters()) out.push_back(p);
  return out;
}

ConstParameterRefs SluModel::parameters() const {
  ConstParameterRefs out = encoder.parameters();
  for (const Parameter* p : classifier.parameters()) out.push_back(p);
  return out;
}

}  // namespace cmls

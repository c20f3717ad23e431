#include <algorithm>
#include <chrono>
#include <limits>
#include <random>
#include <sstream>

#include "cmls/acoustic_encoder.hpp"
#include "cmls/verify.hpp"

namespace cmls::verify {
namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

SuiteResult pooling_oracle(std::uint64_t seed, int instances, double padding_tol) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "pooling oracle";
  Rng rng(seed);
  std::uniform_int_distribution<int> units(1, 4), layers(1, 2), batch_size(1, 4), length(1, 10), dim(1, 5);
  std::bernoulli_distribution coin(0.5);

  int exact = 0, raw_exact = 0;
  double worst_pad = 0.0, worst_prob = 0.0;
  for (int n = 0; n < instances; ++n) {
    AcousticEncoderConfig cfg;
    cfg.hidden_units = units(rng);
    cfg.bidirectional = coin(rng);
    cfg.num_layers = layers(rng);
    cfg.input_dim = dim(rng);
    AcousticEncoder enc(cfg, rng);
    IntentClassifier cls(ClassifierConfig{cfg.output_dim, 3}, rng);

    const int B = batch_size(rng);
    std::vector<Matrix> seqs;
    for (int b = 0; b < B; ++b) seqs.push_back(gaussian(length(rng), cfg.input_dim, rng));
    const PaddedBatch batch = PaddedBatch::from_sequences(std::span<const Matrix>(seqs));

    ag::Tape tape(false);
    const Matrix states = enc.states(tape, batch).value();
    const Matrix pooled = enc.pooled(tape, batch).value();
    bool same = pooled.rows() == B && pooled.cols() == cfg.state_dim();
    for (int b = 0; same && b < B; ++b) {
      for (int f = 0; f < cfg.state_dim(); ++f) {
        double best = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < batch.lengths[static_cast<std::size_t>(b)]; ++t) best = std::max(best, states(t * B + b, f));
        if (pooled(b, f) != best) same = false;
      }
    }
    exact += same;

    // Raw pooling op on arbitrary states, padding rows filled with large values.
    Matrix raw = gaussian(static_cast<Eigen::Index>(batch.max_length) * B, 3, rng);
    for (int b = 0; b < B; ++b)
      for (int t = batch.lengths[static_cast<std::size_t>(b)]; t < batch.max_length; ++t) raw.row(t * B + b).setConstant(1e6);
    const Matrix rp = masked_max_pool(tape.constant(raw), batch.lengths, batch.max_length).value();
    bool raw_same = true;
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < 3; ++f) {
        double best = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < batch.lengths[static_cast<std::size_t>(b)]; ++t) best = std::max(best, raw(t * B + b, f));
        if (rp(b, f) != best) raw_same = false;
      }
    raw_exact += raw_same;

    const Matrix batched = enc.embed(batch);
    const Matrix batched_p = cls.probabilities(batched);
    for (int b = 0; b < B; ++b) {
      const std::vector<Matrix> alone = {seqs[static_cast<std::size_t>(b)]};
      const Matrix single = enc.embed(PaddedBatch::from_sequences(std::span<const Matrix>(alone)));
      worst_pad = std::max(worst_pad, (single.row(0) - batched.row(b)).cwiseAbs().maxCoeff());
      worst_prob = std::max(worst_prob, (cls.probabilities(single).row(0) - batched_p.row(b)).cwiseAbs().maxCoeff());
    }
  }
  s.add("encoder pooling equals brute-force max", exact == instances,
        std::to_string(exact) + "/" + std::to_string(instances) + " exact");
  s.add("pooling op ignores padding values", raw_exact == instances,
        std::to_string(raw_exact) + "/" + std::to_string(instances) + " exact");
  std::ostringstream pad, prob;
  pad << "max abs difference " << worst_pad;
  prob << "max abs difference " << worst_prob;
  s.add("padding invariance of embeddings", worst_pad <= padding_tol, pad.str());
  s.add("padding invariance of class probabilities", worst_prob <= padding_tol, prob.str());

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace cmls::verify

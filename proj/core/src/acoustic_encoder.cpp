#include "cmls/acoustic_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cmls/errors.hpp"

namespace cmls {

void AcousticEncoderConfig::validate() const {
  if (num_layers < 1) throw ValidationError("acoustic encoder: num_layers must be >= 1");
  if (hidden_units < 1) throw ValidationError("acoustic encoder: hidden_units must be >= 1");
  if (input_dim < 1) throw ValidationError("acoustic encoder: input_dim must be >= 1");
  if (output_dim != kEmbeddingDim)
    throw ValidationError("acoustic encoder: output_dim must equal the text embedding dimension (" +
                          std::to_string(kEmbeddingDim) + ")");
}

namespace {

template <typename Seq>
PaddedBatch pad(std::span<Seq> seqs, auto&& get) {
  if (seqs.empty()) throw ValidationError("padded batch: no sequences");
  PaddedBatch b;
  const Eigen::Index dim = get(seqs[0]).cols();
  for (const auto& s : seqs) {
    const Matrix& m = get(s);
    if (m.rows() < 1) throw ValidationError("padded batch: zero-length sequence");
    if (m.cols() != dim) throw ValidationError("padded batch: inconsistent feature dimension");
    b.lengths.push_back(static_cast<int>(m.rows()));
    b.max_length = std::max(b.max_length, static_cast<int>(m.rows()));
  }
  const auto n = static_cast<Eigen::Index>(seqs.size());
  b.data = Matrix::Zero(b.max_length * n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& m = get(seqs[static_cast<std::size_t>(i)]);
    for (Eigen::Index t = 0; t < m.rows(); ++t) b.data.row(t * n + i) = m.row(t);
  }
  return b;
}

}  // namespace

PaddedBatch PaddedBatch::from_sequences(std::span<const Matrix* const> sequences) {
  return pad(sequences, [](const Matrix* m) -> const Matrix& { return *m; });
}

PaddedBatch PaddedBatch::from_sequences(std::span<const Matrix> sequences) {
  return pad(sequences, [](const Matrix& m) -> const Matrix& { return m; });
}

FeatureNormalizer FeatureNormalizer::identity(int dim) {
  return {RowVector::Zero(dim), RowVector::Ones(dim)};
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureSequence> sequences) {
  if (sequences.empty()) throw ValidationError("feature normalizer: no sequences");
  const Eigen::Index dim = sequences[0].frames.cols();
  RowVector sum = RowVector::Zero(dim), sq = RowVector::Zero(dim);
  double count = 0;
  for (const auto& s : sequences) {
    sum += s.frames.colwise().sum();
    sq += s.frames.array().square().matrix().colwise().sum();
    count += static_cast<double>(s.frames.rows());
  }
  FeatureNormalizer n;
  n.mean = sum / count;
  RowVector var = (sq / count).array() - n.mean.array().square();
  n.inv_std = var.unaryExpr([](Real v) { return 1.0 / std::sqrt(std::max(v, 1e-8)); });
  return n;
}

Matrix FeatureNormalizer::apply(const Matrix& frames) const {
  return (frames.rowwise() - mean).array().rowwise() * inv_std.array();
}

namespace {

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

struct LstmTrace {
  // Per processing step s (time index depends on direction).
  std::vector<Matrix> h_prev, c_prev, i, f, g, o, tanh_c;
  std::vector<Vector> mask;
};

}  // namespace

ag::Var lstm_direction(ag::Var inputs, std::span<const int> lengths, int max_length, ag::Var w_input,
                       ag::Var w_recurrent, ag::Var bias, bool reverse) {
  const auto B = static_cast<Eigen::Index>(lengths.size());
  const Eigen::Index T = max_length;
  const Eigen::Index H = w_recurrent.rows();
  if (inputs.rows() != T * B) throw ValidationError("lstm: input rows do not match batch layout");
  if (w_input.rows() != inputs.cols() || w_input.cols() != 4 * H || w_recurrent.cols() != 4 * H ||
      bias.rows() != 1 || bias.cols() != 4 * H)
    throw ValidationError("lstm: weight shapes do not match");

  Matrix z = (inputs.value() * w_input.value()).rowwise() + bias.value().row(0);
  auto trace = std::make_shared<LstmTrace>();
  for (auto* v : {&trace->h_prev, &trace->c_prev, &trace->i, &trace->f, &trace->g, &trace->o, &trace->tanh_c})
    v->resize(static_cast<std::size_t>(T));
  trace->mask.resize(static_cast<std::size_t>(T));

  Matrix out = Matrix::Zero(T * B, H);
  Matrix h = Matrix::Zero(B, H), c = Matrix::Zero(B, H);
  const Matrix& wr = w_recurrent.value();
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    const auto k = static_cast<std::size_t>(s);
    Matrix a = z.middleRows(t * B, B) + h * wr;
    trace->i[k] = sigmoid(a.leftCols(H));
    trace->f[k] = sigmoid(a.middleCols(H, H));
    trace->g[k] = a.middleCols(2 * H, H).array().tanh().matrix();
    trace->o[k] = sigmoid(a.rightCols(H));
    Vector m(B);
    for (Eigen::Index b = 0; b < B; ++b) m(b) = t < lengths[static_cast<std::size_t>(b)] ? 1.0 : 0.0;

    Matrix c_new = trace->f[k].cwiseProduct(c) + trace->i[k].cwiseProduct(trace->g[k]);
    trace->tanh_c[k] = c_new.array().tanh().matrix();
    Matrix h_new = trace->o[k].cwiseProduct(trace->tanh_c[k]);
    trace->h_prev[k] = h;
    trace->c_prev[k] = c;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (m(b) > 0) {
        h.row(b) = h_new.row(b);
        c.row(b) = c_new.row(b);
        out.row(t * B + b) = h_new.row(b);
      }
    }
    trace->mask[k] = std::move(m);
  }

  return inputs.tape().record(
      std::move(out), {inputs, w_input, w_recurrent, bias},
      [inputs, w_input, w_recurrent, bias, trace, B, T, H, reverse](ag::Tape& tape, const Matrix&, const Matrix& grad) {
        const Matrix& wr = w_recurrent.value();
        Matrix dz = Matrix::Zero(T * B, 4 * H);
        Matrix dwr = Matrix::Zero(H, 4 * H);
        Matrix dh = Matrix::Zero(B, H), dc = Matrix::Zero(B, H);
        for (Eigen::Index s = T - 1; s >= 0; --s) {
          const Eigen::Index t = reverse ? T - 1 - s : s;
          const auto k = static_cast<std::size_t>(s);
          const Vector& m = trace->mask[k];
          const auto mcol = m.array();
          Matrix dh_new = ((dh + grad.middleRows(t * B, B)).array().colwise() * mcol).matrix();
          Matrix dh_carry = (dh.array().colwise() * (1.0 - mcol)).matrix();
          Matrix dc_new = (dc.array().colwise() * mcol).matrix();
          Matrix dc_carry = (dc.array().colwise() * (1.0 - mcol)).matrix();

          const Matrix& ig = trace->i[k];
          const Matrix& fg = trace->f[k];
          const Matrix& gg = trace->g[k];
          const Matrix& og = trace->o[k];
          const Matrix& tc = trace->tanh_c[k];
          Matrix d_o = dh_new.cwiseProduct(tc);
          dc_new += dh_new.cwiseProduct(og).cwiseProduct((1.0 - tc.array().square()).matrix());
          Matrix d_f = dc_new.cwiseProduct(trace->c_prev[k]);
          Matrix d_i = dc_new.cwiseProduct(gg);
          Matrix d_g = dc_new.cwiseProduct(ig);

          Matrix da(B, 4 * H);
          da.leftCols(H) = (d_i.array() * ig.array() * (1.0 - ig.array())).matrix();
          da.middleCols(H, H) = (d_f.array() * fg.array() * (1.0 - fg.array())).matrix();
          da.middleCols(2 * H, H) = (d_g.array() * (1.0 - gg.array().square())).matrix();
          da.rightCols(H) = (d_o.array() * og.array() * (1.0 - og.array())).matrix();

          dz.middleRows(t * B, B) = da;
          dwr.noalias() += trace->h_prev[k].transpose() * da;
          dh = dh_carry + da * wr.transpose();
          dc = dc_carry + dc_new.cwiseProduct(fg);
        }
        if (tape.requires_grad(inputs)) tape.accumulate(inputs, dz * w_input.value().transpose());
        if (tape.requires_grad(w_input)) tape.accumulate(w_input, inputs.value().transpose() * dz);
        if (tape.requires_grad(w_recurrent)) tape.accumulate(w_recurrent, dwr);
        if (tape.requires_grad(bias)) tape.accumulate(bias, dz.colwise().sum());
      });
}

ag::Var masked_max_pool(ag::Var states, std::span<const int> lengths, int max_length) {
  const auto B = static_cast<Eigen::Index>(lengths.size());
  const Eigen::Index F = states.cols();
  if (states.rows() != static_cast<Eigen::Index>(max_length) * B)
    throw ValidationError("masked_max_pool: state rows do not match batch layout");
  const Matrix& x = states.value();
  Matrix out(B, F);
  std::vector<int> argmax(static_cast<std::size_t>(B * F));
  for (Eigen::Index b = 0; b < B; ++b) {
    const int len = lengths[static_cast<std::size_t>(b)];
    if (len < 1 || len > max_length) throw ValidationError("masked_max_pool: invalid sequence length");
    for (Eigen::Index f = 0; f < F; ++f) {
      Real best = -std::numeric_limits<Real>::infinity();
      int arg = 0;
      for (int t = 0; t < len; ++t) {
        const Real v = x(t * B + b, f);
        if (v > best) {
          best = v;
          arg = t;
        }
      }
      out(b, f) = best;
      argmax[static_cast<std::size_t>(b * F + f)] = arg;
    }
  }
  return states.tape().record(std::move(out), {states}, [states, argmax, B, F](ag::Tape& tape, const Matrix&, const Matrix& g) {
    Matrix d = Matrix::Zero(states.rows(), F);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index f = 0; f < F; ++f) d(argmax[static_cast<std::size_t>(b * F + f)] * B + b, f) += g(b, f);
    tape.accumulate(states, d);
  });
}

AcousticEncoder::AcousticEncoder(AcousticEncoderConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int H = cfg_.hidden_units;
  const int dirs = cfg_.bidirectional ? 2 : 1;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const int in = l == 0 ? cfg_.input_dim : cfg_.state_dim();
    std::vector<LstmWeights> layer;
    for (int d = 0; d < dirs; ++d) {
      const std::string p = "acoustic.lstm" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      layer.push_back({Parameter(p + ".w_input", fan_in_uniform(in, 4 * H, H, rng)),
                       Parameter(p + ".w_recurrent", fan_in_uniform(H, 4 * H, H, rng)),
                       Parameter(p + ".bias", fan_in_uniform(1, 4 * H, H, rng))});
    }
    layers_.push_back(std::move(layer));
  }
  projection_ = Linear("acoustic.projection", cfg_.state_dim(), cfg_.output_dim, rng);
}

ag::Var AcousticEncoder::states(ag::Tape& tape, const PaddedBatch& batch) const {
  if (batch.feature_dim() != cfg_.input_dim)
    throw ValidationError("acoustic encoder: expected " + std::to_string(cfg_.input_dim) + "-dim features, got " +
                          std::to_string(batch.feature_dim()));
  for (int len : batch.lengths)
    if (len < 1) throw ValidationError("acoustic encoder: zero-length sequence");
  ag::Var x = tape.constant(batch.data);
  for (const auto& layer : layers_) {
    std::vector<ag::Var> dirs;
    for (std::size_t d = 0; d < layer.size(); ++d) {
      const LstmWeights& w = layer[d];
      dirs.push_back(lstm_direction(x, batch.lengths, batch.max_length, tape.param(w.w_input), tape.param(w.w_recurrent),
                                    tape.param(w.bias), d == 1));
    }
    x = dirs.size() == 1 ? dirs[0] : ag::hconcat(dirs);
  }
  return x;
}

ag::Var AcousticEncoder::pooled(ag::Tape& tape, const PaddedBatch& batch) const {
  return masked_max_pool(states(tape, batch), batch.lengths, batch.max_length);
}

ag::Var AcousticEncoder::forward(ag::Tape& tape, const PaddedBatch& batch) const {
  return projection_.forward(tape, pooled(tape, batch));
}

Matrix AcousticEncoder::embed(const PaddedBatch& batch) const {
  ag::Tape tape(false);
  return forward(tape, batch).value();
}

ParameterRefs AcousticEncoder::parameters() {
  ParameterRefs out;
  for (auto& layer : layers_)
    for (auto& w : layer) out.insert(out.end(), {&w.w_input, &w.w_recurrent, &w.bias});
  projection_.collect(out);
  return out;
}

ConstParameterRefs AcousticEncoder::parameters() const {
  ConstParameterRefs out;
  for (const auto& layer : layers_)
    for (const auto& w : layer) out.insert(out.end(), {&w.w_input, &w.w_recurrent, &w.bias});
  projection_.collect(out);
  return out;
}

void ClassifierConfig::validate() const {
  if (input_dim < 1) throw ValidationError("classifier: input_dim must be >= 1");
  if (num_intents < 2) throw ValidationError("classifier: num_intents must be >= 2");
}

IntentClassifier::IntentClassifier(ClassifierConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  layer_ = Linear("classifier", cfg_.input_dim, cfg_.num_intents, rng);
}

IntentClassifier IntentClassifier::zeros(ClassifierConfig cfg) {
  cfg.validate();
  IntentClassifier c;
  c.cfg_ = cfg;
  c.layer_ = Linear::zeros("classifier", cfg.input_dim, cfg.num_intents);
  return c;
}

ag::Var IntentClassifier::logits(ag::Tape& tape, ag::Var embeddings) const {
  if (embeddings.cols() != cfg_.input_dim) throw ValidationError("classifier: embedding dimension mismatch");
  return layer_.forward(tape, embeddings);
}

Matrix IntentClassifier::probabilities(const Matrix& embeddings) const {
  ag::Tape tape(false);
  return ag::softmax_rows(logits(tape, tape.constant(embeddings))).value();
}

Vector IntentClassifier::classify(const Vector& embedding) const {
  if (embedding.size() != cfg_.input_dim) throw ValidationError("classifier: embedding dimension mismatch");
  return probabilities(embedding.transpose()).row(0).transpose();
}

ParameterRefs IntentClassifier::parameters() {
  ParameterRefs out;
  layer_.collect(out);
  return out;
}

ConstParameterRefs IntentClassifier::parameters() const {
  ConstParameterRefs out;
  layer_.collect(out);
  return out;
}

}  // namespace cmls

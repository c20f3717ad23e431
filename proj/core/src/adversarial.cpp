#include "cmls/adversarial.hpp"

#include <algorithm>
#include <cmath>

#include "cmls/errors.hpp"

namespace cmls {

DiscriminatorConfig DiscriminatorConfig::fsc() { return {256, 2, 0.1}; }
DiscriminatorConfig DiscriminatorConfig::snips() { return {512, 1, 0.3}; }

void DiscriminatorConfig::validate() const {
  if (num_layers < 1) throw ValidationError("discriminator: num_layers must be >= 1");
  if (num_units < 1) throw ValidationError("discriminator: num_units must be >= 1");
  if (!(adv_weight >= 0.0) || !std::isfinite(adv_weight)) throw ValidationError("discriminator: adv_weight must be >= 0");
  if (input_dim < 1) throw ValidationError("discriminator: input_dim must be >= 1");
}

Discriminator::Discriminator(DiscriminatorConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int in = cfg_.input_dim;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    hidden_.emplace_back("discriminator.hidden" + std::to_string(l), in, cfg_.num_units, rng);
    in = cfg_.num_units;
  }
  output_ = cfg_.zero_init_output ? Linear::zeros("discriminator.output", in, 1) : Linear("discriminator.output", in, 1, rng);
}

ag::Var Discriminator::logits(ag::Tape& tape, ag::Var x, bool frozen) const {
  if (x.cols() != cfg_.input_dim) throw ValidationError("discriminator: embedding dimension mismatch");
  auto apply = [&](const Linear& l, ag::Var v) {
    if (!frozen) return l.forward(tape, v);
    return ag::add_row(ag::matmul(v, tape.constant(l.weight.value)), tape.constant(l.bias.value));
  };
  for (const Linear& l : hidden_) x = ag::relu(apply(l, x));
  return apply(output_, x);
}

Matrix Discriminator::probabilities(const Matrix& embeddings) const {
  ag::Tape tape(false);
  return ag::sigmoid(logits(tape, tape.constant(embeddings))).value();
}

double Discriminator::discriminate(const Embedding& e) const {
  e.validate(cfg_.input_dim);
  return probabilities(e.vector.transpose())(0, 0);
}

double Discriminator::accuracy(const Matrix& text, const Matrix& acoustic) const {
  const Matrix pt = probabilities(text), pa = probabilities(acoustic);
  const double correct = static_cast<double>((pt.array() > 0.5).count() + (pa.array() <= 0.5).count());
  return correct / static_cast<double>(pt.rows() + pa.rows());
}

ParameterRefs Discriminator::parameters() {
  ParameterRefs out;
  for (Linear& l : hidden_) l.collect(out);
  output_.collect(out);
  return out;
}

ConstParameterRefs Discriminator::parameters() const {
  ConstParameterRefs out;
  for (const Linear& l : hidden_) l.collect(out);
  output_.collect(out);
  return out;
}

namespace {

double clip(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

}  // namespace

double discriminator_objective(std::span<const double> p_text, std::span<const double> p_acoustic) {
  if (p_text.empty() || p_acoustic.empty()) throw ValidationError("discriminator_objective: empty batch");
  double lt = 0.0, la = 0.0;
  for (double p : p_text) lt -= std::log(clip(p));
  for (double p : p_acoustic) la -= std::log(1.0 - clip(p));
  return lt / static_cast<double>(p_text.size()) + la / static_cast<double>(p_acoustic.size());
}

double fooling_loss(std::span<const double> p_acoustic) {
  if (p_acoustic.empty()) throw ValidationError("fooling_loss: empty batch");
  double l = 0.0;
  for (double p : p_acoustic) l -= std::log(clip(p));
  return l / static_cast<double>(p_acoustic.size());
}

ag::Var discriminator_loss(ag::Tape& tape, const Discriminator& d, ag::Var text, ag::Var acoustic) {
  if (text.rows() == 0 || acoustic.rows() == 0) throw ValidationError("discriminator_loss: empty batch");
  const std::vector<Real> ones(static_cast<std::size_t>(text.rows()), 1.0);
  const std::vector<Real> zeros(static_cast<std::size_t>(acoustic.rows()), 0.0);
  return ag::add(ag::bce_logits_clipped(d.logits(tape, text), ones, kProbabilityClip),
                 ag::bce_logits_clipped(d.logits(tape, acoustic), zeros, kProbabilityClip));
}

ag::Var generator_term(ag::Tape& tape, const Discriminator& d, ag::Var acoustic, double adv_weight) {
  if (acoustic.rows() == 0) throw ValidationError("generator_term: empty batch");
  const std::vector<Real> ones(static_cast<std::size_t>(acoustic.rows()), 1.0);
  return ag::scale(ag::bce_logits_clipped(d.logits(tape, acoustic, true), ones, kProbabilityClip), adv_weight);
}

double discriminator_step(Discriminator& d, Adam& optimizer, std::size_t group, const Matrix& text, const Matrix& acoustic) {
  ag::Tape tape;
  ag::Var loss = discriminator_loss(tape, d, tape.constant(text), tape.constant(acoustic));
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value))
    throw DivergenceError("discriminator_step: non-finite loss (text rows " + std::to_string(text.rows()) +
                          ", acoustic rows " + std::to_string(acoustic.rows()) + ", text finite " +
                          (text.allFinite() ? "yes" : "no") + ", acoustic finite " + (acoustic.allFinite() ? "yes" : "no") + ")");
  zero_grads(optimizer.group_params(group));
  tape.backward(loss);
  optimizer.step_group(group);
  return value;
}

}  // namespace cmls

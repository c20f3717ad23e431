#pragma once

#include <span>
#include <string>
#include <vector>

#include "cmls/embedding.hpp"
#include "cmls/layers.hpp"
#include "cmls/optimizer.hpp"

namespace cmls {

/// Probabilities are clipped to [kProbabilityClip, 1 - kProbabilityClip] before any log.
inline constexpr double kProbabilityClip = 1e-7;

struct DiscriminatorConfig {
  int num_units = 256;
  int num_layers = 2;  // hidden layers before the sigmoid output
  double adv_weight = 0.1;
  int input_dim = kEmbeddingDim;
  bool zero_init_output = false;

  /// Tuned values for Fluent Speech Commands: 256 units, 2 layers, weight 0.1.
  static DiscriminatorConfig fsc();
  /// Tuned values for Snips SmartLights: 512 units, 1 layer, weight 0.3.
  static DiscriminatorConfig snips();
  void validate() const;
};

/// Modality discriminator: ReLU MLP ending in one sigmoid unit that gives the
/// probability an embedding comes from the text encoder (text = 1, acoustic = 0).
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(DiscriminatorConfig cfg, Rng& rng);

  const DiscriminatorConfig& config() const { return cfg_; }

  /// Pre-sigmoid scores, n x 1. With frozen set the weights enter the tape as
  /// constants and receive no gradient.
  ag::Var logits(ag::Tape& tape, ag::Var embeddings, bool frozen = false) const;
  /// Sigmoid outputs, n x 1.
  Matrix probabilities(const Matrix& embeddings) const;
  double discriminate(const Embedding& e) const;
  /// Fraction of text rows scored > 0.5 plus acoustic rows scored <= 0.5.
  double accuracy(const Matrix& text, const Matrix& acoustic) const;

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<Linear> hidden_;
  Linear output_;
};

/// -mean log D(text) - mean log(1 - D(acoustic)), the negated bracket of the
/// min-max objective, on already-computed probabilities.
double discriminator_objective(std::span<const double> p_text, std::span<const double> p_acoustic);
/// Non-saturating fooling loss: -mean log D(acoustic).
double fooling_loss(std::span<const double> p_acoustic);

/// Discriminator BCE on the tape (text targets 1, acoustic targets 0).
ag::Var discriminator_loss(ag::Tape& tape, const Discriminator& d, ag::Var text, ag::Var acoustic);
/// adv_weight * BCE(D(acoustic), 1) with D frozen.
ag::Var generator_term(ag::Tape& tape, const Discriminator& d, ag::Var acoustic, double adv_weight);

/// One ascent step on the discriminator objective (descent on its BCE) using
/// detached embeddings. Only the discriminator's parameters change. Returns the pre-step loss.
double discriminator_step(Discriminator& d, Adam& optimizer, std::size_t group, const Matrix& text, const Matrix& acoustic);

}  // namespace cmls

#pragma once

#include <span>
#include <string>

#include "cmls/autograd.hpp"
#include "cmls/embedding.hpp"

namespace cmls {

enum class Coupling { none, l2, ranking, triplet, adversarial };
enum class DistanceKind { squared_euclidean };

std::string to_string(Coupling c);
Coupling parse_coupling(const std::string& name);

struct LossConfig {
  Coupling coupling = Coupling::triplet;
  double margin = 1.0;
  double lambda1 = 1.0;  // text classification weight
  double lambda2 = 1.0;  // embedding-loss weight
  DistanceKind distance = DistanceKind::squared_euclidean;

  void validate() const;
};

/// Acoustic x1 and text x2 with t = 1 iff they share an intent.
struct PairExample {
  Embedding x1;
  Embedding x2;
  bool same_intent = false;
};

/// Acoustic anchor, same-intent text positive, other-intent text negative.
struct TripletExample {
  Embedding anchor;
  Embedding positive;
  Embedding negative;
};

/// d(x1, x2) = sum_i (x1_i - x2_i)^2
double distance(const Vector& x1, const Vector& x2);

double l2_loss(const Vector& acoustic, const Vector& text);
/// t = 1: d; t = 0: max{0, m - d}.
double ranking_loss(const Vector& x1, const Vector& x2, bool same_intent, double margin);
/// max{0, m + d(a, +) - d(a, -)}
double triplet_loss(const Vector& anchor, const Vector& positive, const Vector& negative, double margin);
/// -log probs[target]
double classification_loss(const Vector& probs, int target);
/// ce_acoustic + lambda1 * ce_text + lambda2 * embedding_loss; throws DivergenceError on non-finite input.
double combined_loss(double ce_acoustic, double ce_text, double embedding_loss, const LossConfig& cfg);

double l2_loss(const PairExample& pair);
double ranking_loss(const PairExample& pair, double margin);
double triplet_loss(const TripletExample& tri, double margin);
/// Mean reduction over a batch.
double l2_loss(std::span<const PairExample> pairs);
double ranking_loss(std::span<const PairExample> pairs, double margin);
double triplet_loss(std::span<const TripletExample> triplets, double margin);

/// Value and gradients with respect to each vector argument. On a hinge
/// boundary the zero subgradient is returned.
struct PairGrad {
  double value = 0.0;
  Vector d_x1, d_x2;
};
struct TripletGrad {
  double value = 0.0;
  Vector d_anchor, d_positive, d_negative;
};
PairGrad distance_grad(const Vector& x1, const Vector& x2);
PairGrad ranking_loss_grad(const Vector& x1, const Vector& x2, bool same_intent, double margin);
TripletGrad triplet_loss_grad(const Vector& anchor, const Vector& positive, const Vector& negative, double margin);

/// Row indices into a batch's acoustic and text embedding matrices.
struct PairIndex {
  int acoustic = 0;
  int text = 0;
  bool same_intent = false;
};
struct TripletIndex {
  int anchor = 0;    // acoustic row
  int positive = 0;  // text row
  int negative = 0;  // text row
};

/// Mean L2 coupling between row i of acoustic and row i of text.
ag::Var l2_coupling(ag::Var acoustic, ag::Var text);
ag::Var ranking_coupling(ag::Var acoustic, ag::Var text, std::span<const PairIndex> pairs, double margin);
ag::Var triplet_coupling(ag::Var acoustic, ag::Var text, std::span<const TripletIndex> triplets, double margin);

}  // namespace cmls

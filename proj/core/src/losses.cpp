#include "cmls/losses.hpp"

#include <cmath>
#include <vector>

#include "cmls/errors.hpp"

namespace cmls {

void Embedding::validate(int expected_dim) const {
  if (vector.size() != expected_dim)
    throw ValidationError("embedding has dimension " + std::to_string(vector.size()) + ", expected " +
                          std::to_string(expected_dim));
  if (!vector.allFinite()) throw ValidationError("embedding has non-finite components");
}

std::string to_string(Coupling c) {
  switch (c) {
    case Coupling::none: return "none";
    case Coupling::l2: return "l2";
    case Coupling::ranking: return "ranking";
    case Coupling::triplet: return "triplet";
    case Coupling::adversarial: return "adversarial";
  }
  return "none";
}

Coupling parse_coupling(const std::string& name) {
  for (Coupling c : {Coupling::none, Coupling::l2, Coupling::ranking, Coupling::triplet, Coupling::adversarial})
    if (to_string(c) == name) return c;
  throw ValidationError("unknown coupling '" + name + "' (expected none, l2, ranking, triplet or adversarial)");
}

void LossConfig::validate() const {
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw ValidationError("loss: margin must be finite and >= 0");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1) || !(lambda2 >= 0.0) || !std::isfinite(lambda2))
    throw ValidationError("loss: lambda1 and lambda2 must be finite and >= 0");
}

namespace {

void check_dims(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw ValidationError("distance: dimension mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

template <typename T, typename F>
double mean_of(std::span<const T> xs, F&& f) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : xs) s += f(x);
  return s / static_cast<double>(xs.size());
}

}  // namespace

double distance(const Vector& x1, const Vector& x2) {
  check_dims(x1, x2);
  return (x1 - x2).squaredNorm();
}

double l2_loss(const Vector& acoustic, const Vector& text) { return distance(acoustic, text); }

double ranking_loss(const Vector& x1, const Vector& x2, bool same_intent, double margin) {
  const double d = distance(x1, x2);
  return same_intent ? d : std::max(0.0, margin - d);
}

double triplet_loss(const Vector& anchor, const Vector& positive, const Vector& negative, double margin) {
  return std::max(0.0, margin + distance(anchor, positive) - distance(anchor, negative));
}

double classification_loss(const Vector& probs, int target) {
  if (target < 0 || target >= probs.size())
    throw ValidationError("classification_loss: target " + std::to_string(target) + " out of range");
  return -std::log(probs(target));
}

double combined_loss(double ce_acoustic, double ce_text, double embedding_loss, const LossConfig& cfg) {
  if (!std::isfinite(ce_acoustic) || !std::isfinite(ce_text) || !std::isfinite(embedding_loss))
    throw DivergenceError("combined_loss: non-finite component (ce_acoustic=" + std::to_string(ce_acoustic) +
                          ", ce_text=" + std::to_string(ce_text) + ", embedding=" + std::to_string(embedding_loss) + ")");
  return ce_acoustic + cfg.lambda1 * ce_text + cfg.lambda2 * embedding_loss;
}

double l2_loss(const PairExample& p) { return l2_loss(p.x1.vector, p.x2.vector); }
double ranking_loss(const PairExample& p, double m) { return ranking_loss(p.x1.vector, p.x2.vector, p.same_intent, m); }
double triplet_loss(const TripletExample& t, double m) {
  return triplet_loss(t.anchor.vector, t.positive.vector, t.negative.vector, m);
}
double l2_loss(std::span<const PairExample> pairs) {
  return mean_of(pairs, [](const PairExample& p) { return l2_loss(p); });
}
double ranking_loss(std::span<const PairExample> pairs, double m) {
  return mean_of(pairs, [m](const PairExample& p) { return ranking_loss(p, m); });
}
double triplet_loss(std::span<const TripletExample> triplets, double m) {
  return mean_of(triplets, [m](const TripletExample& t) { return triplet_loss(t, m); });
}

PairGrad distance_grad(const Vector& x1, const Vector& x2) {
  check_dims(x1, x2);
  const Vector diff = x1 - x2;
  return {diff.squaredNorm(), 2.0 * diff, -2.0 * diff};
}

PairGrad ranking_loss_grad(const Vector& x1, const Vector& x2, bool same_intent, double margin) {
  PairGrad g = distance_grad(x1, x2);
  if (same_intent) return g;
  const double d = g.value;
  if (margin - d > 0.0) return {margin - d, -g.d_x1, -g.d_x2};
  return {0.0, Vector::Zero(x1.size()), Vector::Zero(x2.size())};
}

TripletGrad triplet_loss_grad(const Vector& a, const Vector& p, const Vector& n, double margin) {
  check_dims(a, p);
  check_dims(a, n);
  const Vector dp = a - p, dn = a - n;
  const double z = margin + dp.squaredNorm() - dn.squaredNorm();
  if (z <= 0.0) return {0.0, Vector::Zero(a.size()), Vector::Zero(a.size()), Vector::Zero(a.size())};
  return {z, 2.0 * (dp - dn), -2.0 * dp, 2.0 * dn};
}

ag::Var l2_coupling(ag::Var acoustic, ag::Var text) {
  return ag::mean_all(ag::squared_distance_rows(acoustic, text));
}

ag::Var ranking_coupling(ag::Var acoustic, ag::Var text, std::span<const PairIndex> pairs, double margin) {
  if (pairs.empty()) throw ValidationError("ranking_coupling: no pairs");
  std::vector<int> ai, ti;
  Matrix pos(static_cast<Eigen::Index>(pairs.size()), 1), neg(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    ai.push_back(pairs[k].acoustic);
    ti.push_back(pairs[k].text);
    pos(static_cast<Eigen::Index>(k), 0) = pairs[k].same_intent ? 1.0 : 0.0;
    neg(static_cast<Eigen::Index>(k), 0) = pairs[k].same_intent ? 0.0 : 1.0;
  }
  ag::Tape& t = acoustic.tape();
  ag::Var d = ag::squared_distance_rows(ag::gather_rows(acoustic, ai), ag::gather_rows(text, ti));
  ag::Var hinge = ag::relu(ag::add_scalar(ag::scale(d, -1.0), margin));
  ag::Var per_pair = ag::add(ag::mul(t.constant(pos), d), ag::mul(t.constant(neg), hinge));
  return ag::mean_all(per_pair);
}

ag::Var triplet_coupling(ag::Var acoustic, ag::Var text, std::span<const TripletIndex> triplets, double margin) {
  if (triplets.empty()) throw ValidationError("triplet_coupling: no triplets");
  std::vector<int> a, p, n;
  for (const auto& tr : triplets) {
    a.push_back(tr.anchor);
    p.push_back(tr.positive);
    n.push_back(tr.negative);
  }
  ag::Var anchors = ag::gather_rows(acoustic, a);
  ag::Var d_pos = ag::squared_distance_rows(anchors, ag::gather_rows(text, p));
  ag::Var d_neg = ag::squared_distance_rows(anchors, ag::gather_rows(text, n));
  return ag::mean_all(ag::relu(ag::add_scalar(ag::sub(d_pos, d_neg), margin)));
}

}  // namespace cmls

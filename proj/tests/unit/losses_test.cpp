#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "cmls/errors.hpp"
#include "cmls/losses.hpp"
#include "test_support.hpp"

namespace cmls {
namespace {

using testing::random_vector;

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Vector whose squared distance from the origin is d.
Vector at_distance(double d, int dim = 4) {
  Vector v = Vector::Zero(dim);
  v(0) = std::sqrt(d);
  return v;
}

Embedding emb(Vector v, Modality m, int intent) { return Embedding{std::move(v), m, intent, {}}; }

TEST(Distance, ClosedFormCases) {
  EXPECT_EQ(distance(v2(0.3, -2), v2(0.3, -2)), 0.0);
  EXPECT_EQ(distance(v2(1, 0), v2(0, 1)), 2.0);
  EXPECT_THROW(distance(v2(1, 0), Vector::Zero(3)), ValidationError);
}

TEST(Distance, MatchesElementwiseOracle) {
  Rng rng(1);
  for (int k = 0; k < 10; ++k) {
    const Vector a = random_vector(kEmbeddingDim, rng), b = random_vector(kEmbeddingDim, rng);
    double oracle = 0.0;
    for (int i = 0; i < kEmbeddingDim; ++i) {
      const double diff = a[i] - b[i];
      oracle += diff * diff;
    }
    EXPECT_NEAR(distance(a, b), oracle, 1e-9);
    EXPECT_EQ(distance(a, b), distance(b, a));
  }
}

TEST(L2Loss, Cases) {
  EXPECT_EQ(l2_loss(v2(4, 4), v2(4, 4)), 0.0);
  EXPECT_EQ(l2_loss(v2(1, 0), v2(0, 1)), 2.0);
  // Per-pair distances 2, 25 and 0: mean 9.
  const std::vector<PairExample> pairs = {
      {emb(v2(1, 0), Modality::acoustic, 0), emb(v2(0, 1), Modality::text, 0), true},
      {emb(v2(0, 0), Modality::acoustic, 1), emb(v2(3, 4), Modality::text, 1), true},
      {emb(v2(-1, 2), Modality::acoustic, 0), emb(v2(-1, 2), Modality::text, 0), true},
  };
  EXPECT_NEAR(l2_loss(std::span<const PairExample>(pairs)), 9.0, 1e-9);
}

TEST(RankingLoss, Cases) {
  Rng rng(2);
  const Vector a = random_vector(6, rng), b = random_vector(6, rng);
  EXPECT_EQ(ranking_loss(a, b, true, 1.0), l2_loss(a, b));
  EXPECT_NEAR(ranking_loss(at_distance(0.2), Vector::Zero(4), false, 1.0), 0.8, 1e-9);
  EXPECT_EQ(ranking_loss(at_distance(1.5), Vector::Zero(4), false, 1.0), 0.0);
  EXPECT_EQ(ranking_loss(at_distance(1.0), Vector::Zero(4), false, 1.0), 0.0);
  const PairGrad g = ranking_loss_grad(at_distance(1.5), Vector::Zero(4), false, 1.0);
  EXPECT_EQ(g.value, 0.0);
  EXPECT_EQ(g.d_x1.norm(), 0.0);
  EXPECT_EQ(g.d_x2.norm(), 0.0);
}

TEST(TripletLoss, Cases) {
  const Vector a = Vector::Zero(4);
  EXPECT_NEAR(triplet_loss(a, at_distance(0.7), at_distance(0.7), 0.3), 0.3, 1e-12);
  EXPECT_NEAR(triplet_loss(a, at_distance(1.0), at_distance(0.5), 0.2), 0.7, 1e-9);
  EXPECT_EQ(triplet_loss(a, at_distance(0.5), at_distance(2.0), 0.2), 0.0);
  Rng rng(3);
  const Vector p = random_vector(5, rng);
  EXPECT_EQ(triplet_loss(random_vector(5, rng), p, p, 0.75), 0.75);
  EXPECT_THROW(triplet_loss(a, Vector::Zero(3), a, 1.0), ValidationError);
}

TEST(TripletLoss, ZeroExactlyOnSaturationSet) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const double dp = u(rng), dn = u(rng), m = u(rng) / 3;
    Vector pos = Vector::Zero(3), neg = Vector::Zero(3);
    pos(0) = std::sqrt(dp);
    neg(1) = std::sqrt(dn);
    const double loss = triplet_loss(Vector::Zero(3), pos, neg, m);
    EXPECT_GE(loss, 0.0);
    if (dn >= dp + m + 1e-12) {
      EXPECT_EQ(loss, 0.0);
    }
    if (dn < dp + m - 1e-12) {
      EXPECT_GT(loss, 0.0);
    }
  }
}

TEST(TripletLoss, MonotoneInBothDistances) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const Vector anchor = random_vector(8, rng), pos = random_vector(8, rng), neg = random_vector(8, rng);
    const double m = u(rng);
    const double base = triplet_loss(anchor, pos, neg, m);
    // Moving the positive away from the anchor along their difference increases d(a,+).
    const double s = 1.0 + u(rng);
    const Vector far_pos = anchor + s * (pos - anchor);
    const Vector far_neg = anchor + s * (neg - anchor);
    EXPECT_GE(triplet_loss(anchor, far_pos, neg, m), base - 1e-12);
    EXPECT_LE(triplet_loss(anchor, pos, far_neg, m), base + 1e-12);
  }
}

TEST(CouplingLosses, NonNegative) {
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    const Vector a = random_vector(5, rng), b = random_vector(5, rng), c = random_vector(5, rng);
    EXPECT_GE(l2_loss(a, b), 0.0);
    EXPECT_GE(ranking_loss(a, b, k % 2 == 0, 3.0), 0.0);
    EXPECT_GE(triplet_loss(a, b, c, 2.0), 0.0);
  }
}

TEST(ClassificationLoss, Cases) {
  const Vector uniform = Vector::Constant(6, 1.0 / 6);
  EXPECT_NEAR(classification_loss(uniform, 4), 1.791759469228055, 1e-9);
  Vector onehot = Vector::Zero(3);
  onehot(2) = 1.0;
  EXPECT_EQ(classification_loss(onehot, 2), 0.0);
  Vector p(3);
  p << 0.2, 0.7, 0.1;
  EXPECT_NEAR(classification_loss(p, 1), 0.35667494393873245, 1e-9);
  EXPECT_THROW(classification_loss(p, 3), ValidationError);
  EXPECT_THROW(classification_loss(p, -1), ValidationError);
}

TEST(CombinedLoss, Cases) {
  LossConfig cfg;
  cfg.lambda1 = 0;
  cfg.lambda2 = 0;
  EXPECT_EQ(combined_loss(0.42, 9.0, 7.0, cfg), 0.42);
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 0.5;
  EXPECT_NEAR(combined_loss(1.0, 0.5, 2.0, cfg), 2.5, 1e-9);
  EXPECT_THROW(combined_loss(std::numeric_limits<double>::quiet_NaN(), 0, 0, cfg), DivergenceError);
  EXPECT_THROW(combined_loss(1.0, std::numeric_limits<double>::infinity(), 0, cfg), DivergenceError);
}

TEST(CombinedLoss, AffineInEachWeight) {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double a = u(rng), t = u(rng), e = u(rng);
    LossConfig c1, c2, c0;
    c1.lambda1 = u(rng);
    c1.lambda2 = u(rng);
    c2 = c1;
    c2.lambda1 *= 2;
    c0 = c1;
    c0.lambda1 = 0;
    EXPECT_NEAR(combined_loss(a, t, e, c2) - combined_loss(a, t, e, c1),
                combined_loss(a, t, e, c1) - combined_loss(a, t, e, c0), 1e-9);
    c2 = c1;
    c2.lambda2 *= 2;
    c0 = c1;
    c0.lambda2 = 0;
    EXPECT_NEAR(combined_loss(a, t, e, c2) - combined_loss(a, t, e, c1),
                combined_loss(a, t, e, c1) - combined_loss(a, t, e, c0), 1e-9);
  }
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_EQ(c.margin, 1.0);
  EXPECT_EQ(c.lambda1, 1.0);
  EXPECT_EQ(c.lambda2, 1.0);
  c.margin = -0.1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = LossConfig{};
  c.lambda2 = std::numeric_limits<double>::infinity();
  EXPECT_THROW(c.validate(), ValidationError);
  for (Coupling k : {Coupling::none, Coupling::l2, Coupling::ranking, Coupling::triplet, Coupling::adversarial})
    EXPECT_EQ(parse_coupling(to_string(k)), k);
  EXPECT_THROW(parse_coupling("contrastive"), ValidationError);
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-8}); }

template <class F>
Vector numeric_grad(F f, Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double fp = f(x);
    x(i) = keep - h;
    const double fm = f(x);
    x(i) = keep;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

TEST(LossGradients, MatchFiniteDifferencesAwayFromHinges) {
  Rng rng(8);
  int checked = 0;
  for (int k = 0; k < 200 && checked < 60; ++k) {
    const Vector a = random_vector(6, rng), p = random_vector(6, rng), n = random_vector(6, rng);
    const double m = 0.5 + (k % 7);
    const double inner = m + distance(a, p) - distance(a, n);
    if (std::abs(inner) < 1e-2) continue;
    const TripletGrad g = triplet_loss_grad(a, p, n, m);
    EXPECT_NEAR(g.value, triplet_loss(a, p, n, m), 1e-12);
    EXPECT_LT(rel(g.d_anchor, numeric_grad([&](const Vector& x) { return triplet_loss(x, p, n, m); }, a)), 1e-4);
    EXPECT_LT(rel(g.d_positive, numeric_grad([&](const Vector& x) { return triplet_loss(a, x, n, m); }, p)), 1e-4);
    EXPECT_LT(rel(g.d_negative, numeric_grad([&](const Vector& x) { return triplet_loss(a, p, x, m); }, n)), 1e-4);

    const double rm = m * 3;
    if (std::abs(rm - distance(a, p)) > 1e-2) {
      for (bool t : {true, false}) {
        const PairGrad r = ranking_loss_grad(a, p, t, rm);
        EXPECT_LT(rel(r.d_x1, numeric_grad([&](const Vector& x) { return ranking_loss(x, p, t, rm); }, a)), 1e-4);
        EXPECT_LT(rel(r.d_x2, numeric_grad([&](const Vector& x) { return ranking_loss(a, x, t, rm); }, p)), 1e-4);
      }
    }
    const PairGrad d = distance_grad(a, p);
    EXPECT_LT(rel(d.d_x1, numeric_grad([&](const Vector& x) { return distance(x, p); }, a)), 1e-4);
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(TapeCouplings, AgreeWithScalarLosses) {
  Rng rng(9);
  const Matrix ae = testing::random_matrix(4, 5, rng), te = testing::random_matrix(4, 5, rng);
  ag::Tape tape(false);
  ag::Var a = tape.constant(ae), t = tape.constant(te);

  double l2 = 0.0;
  for (int i = 0; i < 4; ++i) l2 += l2_loss(ae.row(i).transpose(), te.row(i).transpose());
  EXPECT_NEAR(l2_coupling(a, t).value()(0, 0), l2 / 4, 1e-12);

  const std::vector<PairIndex> pairs = {{0, 0, true}, {0, 2, false}, {3, 1, false}};
  double rk = 0.0;
  for (const PairIndex& p : pairs)
    rk += ranking_loss(ae.row(p.acoustic).transpose(), te.row(p.text).transpose(), p.same_intent, 7.0);
  EXPECT_NEAR(ranking_coupling(a, t, pairs, 7.0).value()(0, 0), rk / 3, 1e-12);

  const std::vector<TripletIndex> tris = {{0, 0, 1}, {2, 3, 0}};
  double tr = 0.0;
  for (const TripletIndex& x : tris)
    tr += triplet_loss(ae.row(x.anchor).transpose(), te.row(x.positive).transpose(), te.row(x.negative).transpose(), 4.0);
  EXPECT_NEAR(triplet_coupling(a, t, tris, 4.0).value()(0, 0), tr / 2, 1e-12);
}

}  // namespace
}  // namespace cmls

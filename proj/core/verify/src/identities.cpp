#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "cmls/adversarial.hpp"
#include "cmls/errors.hpp"
#include "cmls/losses.hpp"
#include "cmls/verify.hpp"

namespace cmls::verify {
namespace {

constexpr double kTol = 1e-9;

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::string show(double got, double want) {
  std::ostringstream os;
  os.precision(17);
  os << "got " << got << ", want " << want;
  return os.str();
}

void expect(SuiteResult& s, const std::string& name, double got, double want) {
  s.add(name, std::abs(got - want) <= kTol, show(got, want));
}

template <class E>
void expect_throw(SuiteResult& s, const std::string& name, const std::function<void()>& fn) {
  bool thrown = false;
  try {
    fn();
  } catch (const E&) {
    thrown = true;
  }
  s.add(name, thrown, thrown ? "" : "no error raised");
}

Embedding emb(const Vector& v, Modality m) { return Embedding{v, m, std::nullopt, {}}; }

}  // namespace

SuiteResult loss_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "loss identities";

  expect(s, "distance x1 = x2", distance(v2(0.3, -1.2), v2(0.3, -1.2)), 0.0);
  expect(s, "distance (1,0) (0,1)", distance(v2(1, 0), v2(0, 1)), 2.0);
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Vector a(768), b(768);
    for (int i = 0; i < 768; ++i) {
      a(i) = g(rng);
      b(i) = g(rng);
    }
    double oracle = 0.0;
    for (int i = 0; i < 768; ++i) oracle += (a(i) - b(i)) * (a(i) - b(i));
    expect(s, "distance random 768-d vs elementwise sum", distance(a, b), oracle);
    expect(s, "distance symmetric", distance(a, b), distance(b, a));
  }
  expect_throw<ValidationError>(s, "distance dimension mismatch", [] { distance(Vector::Zero(2), Vector::Zero(3)); });

  expect(s, "l2 identical", l2_loss(v2(2, 5), v2(2, 5)), 0.0);
  expect(s, "l2 (1,0) (0,1)", l2_loss(v2(1, 0), v2(0, 1)), 2.0);
  {
    // Per-pair values 2, 25 and 0.
    const std::vector<PairExample> pairs = {
        {emb(v2(1, 0), Modality::acoustic), emb(v2(0, 1), Modality::text), true},
        {emb(v2(0, 0), Modality::acoustic), emb(v2(3, 4), Modality::text), true},
        {emb(v2(1, 1), Modality::acoustic), emb(v2(1, 1), Modality::text), true}};
    expect(s, "l2 batch mean of 3 pairs", l2_loss(pairs), 9.0);
  }

  expect(s, "ranking t=1 equals l2", ranking_loss(v2(0.5, 2), v2(-1, 0.25), true, 1.0),
         l2_loss(v2(0.5, 2), v2(-1, 0.25)));
  expect(s, "ranking t=0 d=0.2 m=1", ranking_loss(v2(0, 0), v2(std::sqrt(0.2), 0), false, 1.0), 0.8);
  {
    const Vector a = v2(0, 0), b = v2(1.5, 0);
    expect(s, "ranking t=0 d>=m value", ranking_loss(a, b, false, 1.0), 0.0);
    const PairGrad g = ranking_loss_grad(a, b, false, 1.0);
    s.add("ranking t=0 d>=m zero gradient", g.d_x1.isZero(0.0) && g.d_x2.isZero(0.0));
    expect(s, "ranking t=0 d=m value", ranking_loss(a, v2(1, 0), false, 1.0), 0.0);
  }

  expect(s, "triplet d+ = d-", triplet_loss(v2(0, 0), v2(1, 0), v2(0, 1), 1.0), 1.0);
  expect(s, "triplet m=0.2 d+=1 d-=0.5", triplet_loss(v2(0, 0), v2(1, 0), v2(std::sqrt(0.5), 0), 0.2), 0.7);
  expect(s, "triplet d- - d+ >= m", triplet_loss(v2(0, 0), v2(1, 0), v2(3, 0), 1.0), 0.0);
  expect(s, "triplet p = n gives m", triplet_loss(v2(0.1, 0.4), v2(2, -3), v2(2, -3), 0.75), 0.75);

  {
    Vector u = Vector::Constant(6, 1.0 / 6.0);
    expect(s, "classification uniform over 6", classification_loss(u, 3), 1.791759469228055);
    expect(s, "classification probs[target] = 1", classification_loss(Vector::Unit(4, 2), 2), 0.0);
    Vector p(3);
    p << 0.1, 0.2, 0.7;
    expect(s, "classification hand-computed", classification_loss(p, 2), 0.35667494393873245);
    expect_throw<ValidationError>(s, "classification target out of range", [p] { classification_loss(p, 3); });
    expect_throw<ValidationError>(s, "classification negative target", [p] { classification_loss(p, -1); });
  }

  {
    LossConfig c;
    c.lambda1 = 0.0;
    c.lambda2 = 0.0;
    expect(s, "combined lambda1 = lambda2 = 0", combined_loss(1.25, 7.0, 3.0, c), 1.25);
    c.lambda1 = 1.0;
    c.lambda2 = 0.5;
    expect(s, "combined (1, 0.5, 2) lambda1=1 lambda2=0.5", combined_loss(1.0, 0.5, 2.0, c), 2.5);
    LossConfig l0 = c, l1 = c, l2 = c;
    l0.lambda1 = 0.0;
    l1.lambda1 = 0.3;
    l2.lambda1 = 0.6;
    const double a0 = combined_loss(0.7, 1.9, 0.4, l0), a1 = combined_loss(0.7, 1.9, 0.4, l1),
                 a2 = combined_loss(0.7, 1.9, 0.4, l2);
    expect(s, "combined affine in lambda1", a2 - a1, a1 - a0);
    l0 = c;
    l0.lambda2 = 0.0;
    l1 = c;
    l1.lambda2 = 0.3;
    l2 = c;
    l2.lambda2 = 0.6;
    const double b0 = combined_loss(0.7, 1.9, 0.4, l0), b1 = combined_loss(0.7, 1.9, 0.4, l1),
                 b2 = combined_loss(0.7, 1.9, 0.4, l2);
    expect(s, "combined affine in lambda2", b2 - b1, b1 - b0);
    expect_throw<DivergenceError>(s, "combined non-finite component",
                                  [c] { combined_loss(std::nan(""), 0.0, 0.0, c); });
    expect_throw<DivergenceError>(s, "combined infinite component",
                                  [c] { combined_loss(1.0, INFINITY, 0.0, c); });
  }

  {
    const std::vector<double> half(4, 0.5);
    expect(s, "discriminator objective at 0.5", discriminator_objective(half, half), 1.3862943611198906);
    expect(s, "fooling loss at 0.5", fooling_loss(half), 0.6931471805599453);
    const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
    expect(s, "fooling loss fully fooled", fooling_loss(ones), 1.0000000494736474e-07);
    const double perfect = discriminator_objective(ones, zeros);
    s.add("discriminator objective perfect D at clip level", perfect > 0.0 && perfect < 3e-7, show(perfect, 2e-7));
  }

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace cmls::verify

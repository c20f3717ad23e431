#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "cmls/acoustic_encoder.hpp"
#include "cmls/adversarial.hpp"
#include "cmls/losses.hpp"
#include "cmls/verify.hpp"

namespace cmls::verify {
namespace {

using Scalar = std::function<double()>;

Matrix central_difference(const Scalar& f, Matrix& x, double h) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double fp = f();
    x.data()[i] = keep - h;
    const double fm = f();
    x.data()[i] = keep;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

Matrix gaussian(Eigen::Index r, Eigen::Index c, double sd, Rng& rng) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

double sqdist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) s += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
  return s;
}

struct Tracker {
  std::string name;
  int points = 0;
  double worst = 0.0;
  double worst_value = 0.0;  // largest gap between tape value and oracle formula

  void see(double rel) {
    ++points;
    worst = std::max(worst, rel);
  }
  void report(SuiteResult& s, int wanted, double tol) const {
    std::ostringstream os;
    os << points << " points, max relative error " << worst;
    if (worst_value > 0.0) os << ", max value gap " << worst_value;
    s.add(name, points >= wanted && worst < tol && worst_value < 1e-9, os.str());
  }
};

// Gradient of a tape-built scalar with respect to two differentiable inputs.
using TwoInputLoss = std::function<ag::Var(ag::Tape&, ag::Var, ag::Var)>;

double check_two_inputs(const TwoInputLoss& loss, Matrix a, Matrix b, double h) {
  ag::Tape tape;
  ag::Var va = tape.input(a), vb = tape.input(b);
  ag::Var out = loss(tape, va, vb);
  tape.backward(out);
  const Matrix ga = tape.grad(va), gb = tape.grad(vb);
  auto value = [&] {
    ag::Tape t(false);
    return loss(t, t.constant(a), t.constant(b)).value()(0, 0);
  };
  return std::max(relative_error(ga, central_difference(value, a, h)),
                  relative_error(gb, central_difference(value, b, h)));
}

}  // namespace

SuiteResult gradient_checks(std::uint64_t seed, int points, double h, double tol) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "gradient checks";
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  std::bernoulli_distribution coin(0.5);
  const int B = 4, D = 6;
  const double margin = 1.0, sd = 0.3, gap = 1e-3;

  {
    Tracker t{"l2 coupling"};
    for (int p = 0; p < points; ++p) {
      const Matrix a = gaussian(B, D, sd, rng), b = gaussian(B, D, sd, rng);
      double oracle = 0.0;
      for (int i = 0; i < B; ++i) oracle += sqdist(a, i, b, i) / B;
      ag::Tape tape(false);
      t.worst_value = std::max(t.worst_value, std::abs(l2_coupling(tape.constant(a), tape.constant(b)).value()(0, 0) - oracle));
      t.see(check_two_inputs([](ag::Tape&, ag::Var x, ag::Var y) { return l2_coupling(x, y); }, a, b, h));
    }
    t.report(s, points, tol);
  }

  {
    Tracker t{"ranking coupling"};
    int inside = 0, outside = 0;
    while (t.points < points) {
      const Matrix a = gaussian(B, D, sd, rng), b = gaussian(B, D, sd, rng);
      std::vector<PairIndex> pairs;
      bool boundary = false;
      double oracle = 0.0;
      for (int k = 0; k < 6; ++k) {
        PairIndex pi{pick(rng), pick(rng), coin(rng)};
        const double d = sqdist(a, pi.acoustic, b, pi.text);
        if (!pi.same_intent && std::abs(margin - d) < gap) boundary = true;
        if (!pi.same_intent) (d < margin ? inside : outside)++;
        oracle += pi.same_intent ? d : std::max(0.0, margin - d);
        pairs.push_back(pi);
      }
      if (boundary) continue;
      oracle /= static_cast<double>(pairs.size());
      ag::Tape tape(false);
      t.worst_value = std::max(
          t.worst_value, std::abs(ranking_coupling(tape.constant(a), tape.constant(b), pairs, margin).value()(0, 0) - oracle));
      t.see(check_two_inputs(
          [&](ag::Tape&, ag::Var x, ag::Var y) { return ranking_coupling(x, y, pairs, margin); }, a, b, h));
    }
    t.report(s, points, tol);
    s.add("ranking coupling visits both hinge sides", inside > 0 && outside > 0,
          std::to_string(inside) + " inside, " + std::to_string(outside) + " saturated");
  }

  {
    Tracker t{"triplet coupling"};
    int inside = 0, outside = 0;
    while (t.points < points) {
      const Matrix a = gaussian(B, D, sd, rng), b = gaussian(B, D, sd, rng);
      std::vector<TripletIndex> triplets;
      bool boundary = false;
      double oracle = 0.0;
      for (int k = 0; k < 5; ++k) {
        TripletIndex ti{pick(rng), pick(rng), pick(rng)};
        const double arg = margin + sqdist(a, ti.anchor, b, ti.positive) - sqdist(a, ti.anchor, b, ti.negative);
        if (std::abs(arg) < gap) boundary = true;
        (arg > 0 ? inside : outside)++;
        oracle += std::max(0.0, arg);
        triplets.push_back(ti);
      }
      if (boundary) continue;
      oracle /= static_cast<double>(triplets.size());
      ag::Tape tape(false);
      t.worst_value = std::max(
          t.worst_value,
          std::abs(triplet_coupling(tape.constant(a), tape.constant(b), triplets, margin).value()(0, 0) - oracle));
      t.see(check_two_inputs(
          [&](ag::Tape&, ag::Var x, ag::Var y) { return triplet_coupling(x, y, triplets, margin); }, a, b, h));
    }
    t.report(s, points, tol);
    s.add("triplet coupling visits both hinge sides", inside > 0 && outside > 0,
          std::to_string(inside) + " inside, " + std::to_string(outside) + " saturated");
  }

  {
    Tracker rank{"ranking gradient (vector form)"}, trip{"triplet gradient (vector form)"}, dist{"distance gradient"};
    while (rank.points < points || trip.points < points) {
      Matrix x1 = gaussian(D, 1, sd, rng), x2 = gaussian(D, 1, sd, rng), x3 = gaussian(D, 1, sd, rng);
      const bool same = coin(rng);
      const double d12 = (x1 - x2).squaredNorm(), d13 = (x1 - x3).squaredNorm();
      if (dist.points < points) {
        const PairGrad g = distance_grad(x1, x2);
        auto f = [&] { return distance(x1.col(0), x2.col(0)); };
        dist.see(std::max(relative_error(g.d_x1, central_difference(f, x1, h)),
                          relative_error(g.d_x2, central_difference(f, x2, h))));
      }
      if (rank.points < points && (same || std::abs(margin - d12) >= gap)) {
        const PairGrad g = ranking_loss_grad(x1, x2, same, margin);
        auto f = [&] { return ranking_loss(x1.col(0), x2.col(0), same, margin); };
        rank.see(std::max(relative_error(g.d_x1, central_difference(f, x1, h)),
                          relative_error(g.d_x2, central_difference(f, x2, h))));
      }
      if (trip.points < points && std::abs(margin + d12 - d13) >= gap) {
        const TripletGrad g = triplet_loss_grad(x1, x2, x3, margin);
        auto f = [&] { return triplet_loss(x1.col(0), x2.col(0), x3.col(0), margin); };
        trip.see(std::max({relative_error(g.d_anchor, central_difference(f, x1, h)),
                           relative_error(g.d_positive, central_difference(f, x2, h)),
                           relative_error(g.d_negative, central_difference(f, x3, h))}));
      }
    }
    dist.report(s, points, tol);
    rank.report(s, points, tol);
    trip.report(s, points, tol);
  }

  {
    Tracker inputs{"discriminator loss (embeddings)"}, params{"discriminator loss (parameters)"},
        gen{"generator term (acoustic embeddings)"};
    bool frozen_ok = true;
    for (int p = 0; p < points; ++p) {
      DiscriminatorConfig dc;
      dc.input_dim = D;
      dc.num_units = 5;
      dc.num_layers = 2;
      dc.adv_weight = 0.3;
      Discriminator disc(dc, rng);
      const Matrix text = gaussian(3, D, 1.0, rng), acoustic = gaussian(4, D, 1.0, rng);

      inputs.see(check_two_inputs(
          [&](ag::Tape& t, ag::Var x, ag::Var y) { return discriminator_loss(t, disc, x, y); }, text, acoustic, h));

      ParameterRefs ps = disc.parameters();
      zero_grads(ps);
      {
        ag::Tape tape;
        tape.backward(discriminator_loss(tape, disc, tape.constant(text), tape.constant(acoustic)));
      }
      auto f = [&] {
        ag::Tape t(false);
        return discriminator_loss(t, disc, t.constant(text), t.constant(acoustic)).value()(0, 0);
      };
      double worst = 0.0;
      for (Parameter* q : ps) {
        const Matrix analytic = q->grad;
        worst = std::max(worst, relative_error(analytic, central_difference(f, q->value, h)));
      }
      params.see(worst);

      zero_grads(ps);
      Matrix ac = acoustic;
      ag::Tape tape;
      ag::Var va = tape.input(ac);
      tape.backward(generator_term(tape, disc, va, dc.adv_weight));
      for (Parameter* q : ps) frozen_ok = frozen_ok && q->grad.isZero(0.0);
      auto g = [&] {
        ag::Tape t(false);
        return generator_term(t, disc, t.constant(ac), dc.adv_weight).value()(0, 0);
      };
      gen.see(relative_error(tape.grad(va), central_difference(g, ac, h)));
    }
    inputs.report(s, points, tol);
    params.report(s, points, tol);
    gen.report(s, points, tol);
    s.add("generator term leaves discriminator gradients at zero", frozen_ok);
  }

  {
    Tracker t{"encoder directional derivative"};
    for (int p = 0; p < points; ++p) {
      AcousticEncoderConfig ec;
      ec.num_layers = 2;
      ec.hidden_units = 3;
      ec.input_dim = 4;
      AcousticEncoder enc(ec, rng);
      IntentClassifier cls(ClassifierConfig{ec.output_dim, 3}, rng);
      std::vector<Matrix> seqs = {gaussian(5, 4, 1.0, rng), gaussian(3, 4, 1.0, rng)};
      const PaddedBatch batch = PaddedBatch::from_sequences(std::span<const Matrix>(seqs));
      const Matrix probe = gaussian(2, ec.output_dim, 0.05, rng);
      const std::vector<int> labels = {0, 2};
      auto head = [&](ag::Tape& tape) {
        ag::Var ae = enc.forward(tape, batch);
        return ag::add(ag::cross_entropy_logits(cls.logits(tape, ae), labels),
                       ag::sum_all(ag::mul(ae, tape.constant(probe))));
      };
      ParameterRefs ps = enc.parameters();
      for (Parameter* q : cls.parameters()) ps.push_back(q);
      zero_grads(ps);
      {
        ag::Tape tape;
        tape.backward(head(tape));
      }
      std::vector<Matrix> dir;
      double analytic = 0.0;
      for (Parameter* q : ps) {
        dir.push_back(gaussian(q->value.rows(), q->value.cols(), 1.0, rng));
        analytic += (q->grad.array() * dir.back().array()).sum();
      }
      auto shifted = [&](double step) {
        for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value += step * dir[k];
        ag::Tape tape(false);
        const double v = head(tape).value()(0, 0);
        for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value -= step * dir[k];
        return v;
      };
      const double numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
      t.see(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
    }
    t.report(s, points, tol);
  }

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace cmls::verify

#include <chrono>
#include <random>
#include <sstream>

#include "cmls/adversarial.hpp"
#include "cmls/layers.hpp"
#include "cmls/verify.hpp"

namespace cmls::verify {
namespace {

constexpr int kDim = 16;

Matrix cloud(int n, double mean, double sd, Rng& rng) {
  std::normal_distribution<double> g(mean, sd);
  Matrix m(n, kDim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

SuiteResult adversarial_dynamics(std::uint64_t seed, int steps) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "adversarial dynamics";
  Rng rng(seed);
  const int batch = 64, held_out = 512, warmup = 30;
  const double text_mean = 1.0, text_sd = 0.5;

  DiscriminatorConfig dc = DiscriminatorConfig::fsc();
  dc.input_dim = kDim;
  Discriminator disc(dc, rng);

  Linear map = Linear::zeros("acoustic.map", kDim, kDim);
  map.weight.value = Matrix::Identity(kDim, kDim);
  map.bias.value.setConstant(-1.0);
  ParameterRefs map_params;
  map.collect(map_params);

  Adam adam(AdamConfig{.beta1 = 0.5, .beta2 = 0.999, .epsilon = 1e-9});
  const std::size_t d_group = adam.add_group(disc.parameters(), 1e-4);
  const std::size_t g_group = adam.add_group(map_params, 2e-2);

  const Matrix text_eval = cloud(held_out, text_mean, text_sd, rng);
  const Matrix noise_eval = cloud(held_out, 0.0, 1.0, rng);
  auto accuracy = [&] { return disc.accuracy(text_eval, map.apply(noise_eval)); };

  for (int k = 0; k < warmup; ++k)
    discriminator_step(disc, adam, d_group, cloud(batch, text_mean, text_sd, rng), map.apply(cloud(batch, 0.0, 1.0, rng)));
  const double start = accuracy();
  s.add("discriminator accuracy starts above 0.9", start > 0.9,
        "accuracy " + fmt(start) + " after " + std::to_string(warmup) + " discriminator-only steps");

  bool d_hygiene = true, g_hygiene = true;
  double last = start;
  for (int k = 0; k < steps; ++k) {
    const std::uint64_t map_before = fingerprint(map_params);
    discriminator_step(disc, adam, d_group, cloud(batch, text_mean, text_sd, rng), map.apply(cloud(batch, 0.0, 1.0, rng)));
    d_hygiene = d_hygiene && fingerprint(map_params) == map_before;

    const std::uint64_t disc_before = fingerprint(disc.parameters());
    ag::Tape tape;
    ag::Var acoustic = map.forward(tape, tape.constant(cloud(batch, 0.0, 1.0, rng)));
    zero_grads(map_params);
    tape.backward(generator_term(tape, disc, acoustic, dc.adv_weight));
    adam.step_group(g_group);
    g_hygiene = g_hygiene && fingerprint(disc.parameters()) == disc_before;
    last = accuracy();
  }
  s.add("discriminator accuracy ends within 0.5 +- 0.1", last >= 0.4 && last <= 0.6,
        "accuracy " + fmt(last) + " after " + std::to_string(steps) + " alternating steps");
  s.add("discriminator steps leave the acoustic map unchanged", d_hygiene);
  s.add("generator steps leave the discriminator unchanged", g_hygiene);

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace cmls::verify

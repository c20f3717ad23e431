#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "cmls/acoustic_encoder.hpp"
#include "cmls/losses.hpp"
#include "cmls/mfcc.hpp"
#include "cmls/sampler.hpp"

namespace {

using namespace cmls;

Audio tone(double seconds) {
  Audio a;
  a.sample_rate = 16000;
  const auto n = static_cast<std::size_t>(seconds * a.sample_rate);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = 0.5 * std::sin(2 * M_PI * 220.0 * static_cast<double>(i) / 16000.0);
  return a;
}

PaddedBatch random_batch(int batch, int frames, int dim, Rng& rng) {
  std::normal_distribution<double> g;
  std::vector<Matrix> seqs;
  for (int b = 0; b < batch; ++b) {
    Matrix m(frames - b % 7, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    seqs.push_back(std::move(m));
  }
  return PaddedBatch::from_sequences(std::span<const Matrix>(seqs));
}

void BM_Mfcc(benchmark::State& state) {
  const MfccExtractor ex(FeatureConfig{});
  const Audio a = tone(static_cast<double>(state.range(0)) / 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(ex(a));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(a.samples.size()));
}
BENCHMARK(BM_Mfcc)->Arg(1000)->Arg(3000);

void BM_EncoderForward(benchmark::State& state) {
  Rng rng(1);
  AcousticEncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_units = static_cast<int>(state.range(0));
  const AcousticEncoder enc(cfg, rng);
  const PaddedBatch batch = random_batch(16, 100, cfg.input_dim, rng);
  for (auto _ : state) benchmark::DoNotOptimize(enc.embed(batch));
}
BENCHMARK(BM_EncoderForward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state) {
  Rng rng(2);
  AcousticEncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_units = static_cast<int>(state.range(0));
  AcousticEncoder enc(cfg, rng);
  const PaddedBatch batch = random_batch(16, 100, cfg.input_dim, rng);
  for (auto _ : state) {
    ag::Tape tape;
    tape.backward(ag::mean_all(enc.forward(tape, batch)));
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TripletCoupling(benchmark::State& state) {
  Rng rng(3);
  const int n = static_cast<int>(state.range(0));
  std::vector<int> intents(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) intents[static_cast<std::size_t>(i)] = i % 6;
  std::normal_distribution<double> g;
  Matrix a(n, kEmbeddingDim), t(n, kEmbeddingDim);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = g(rng);
    t.data()[i] = g(rng);
  }
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto tris = mine_triplet_indices(intents, seed++);
    ag::Tape tape;
    tape.backward(triplet_coupling(tape.input(a), tape.input(t), tris, 1.0));
  }
}
BENCHMARK(BM_TripletCoupling)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();

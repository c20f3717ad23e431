#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cmls::verify {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const;
  int num_failed() const;
  void add(std::string check, bool ok, std::string detail = {});
};

/// Every closed-form loss example at 1e-9.
SuiteResult loss_identities();

/// Analytic gradients of the coupling losses, the discriminator and generator
/// objectives and a scalar head on the acoustic encoder against central
/// differences with step h, at `points` random points per loss.
SuiteResult gradient_checks(std::uint64_t seed = 7, int points = 20, double h = 1e-5, double tolerance = 1e-4);

/// Masked max-pooling against a brute-force scan on random tiny encoders, plus
/// padding invariance of embeddings and class probabilities.
SuiteResult pooling_oracle(std::uint64_t seed = 11, int instances = 100, double padding_tolerance = 1e-5);

/// Every label sequence of length 1..max_batch over num_intents intents.
SuiteResult sampler_invariants(int max_batch = 8, int num_intents = 3);

struct EndToEndOptions {
  std::filesystem::path work_dir;
  std::vector<int> intent_counts{2, 6};
  int per_intent = 50;
  int max_epochs = 20;
  double min_accuracy = 0.95;
  double time_budget_seconds = 600.0;
  std::uint64_t seed = 1;
};

/// Synthetic data, triplet coupling: test accuracy, embedding geometry, wall time.
SuiteResult synthetic_end_to_end(const EndToEndOptions& options);

/// Separable clouds, trainable linear acoustic map, frozen text cloud.
SuiteResult adversarial_dynamics(std::uint64_t seed = 3, int steps = 200);

/// coupling none with lambda1 = lambda2 = 0 on the synthetic set.
SuiteResult baseline_reduction(const std::filesystem::path& work_dir, std::uint64_t seed = 1);

}  // namespace cmls::verify

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cmls {

using Real = double;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

/// Dimension of the shared acoustic/text latent space.
inline constexpr int kEmbeddingDim = 768;

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  // Gradients are a scratch buffer filled by Tape::backward, so they stay
  // writable through const access to the owning module.
  mutable Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

/// Non-owning view over a module's parameters, in a stable order.
using ParameterRefs = std::vector<Parameter*>;
using ConstParameterRefs = std::vector<const Parameter*>;

void zero_grads(const ParameterRefs& params);

/// FNV-1a over raw bytes; used for config hashes and parameter fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t fingerprint(const ParameterRefs& params);
std::uint64_t fingerprint(const ConstParameterRefs& params);
std::string hex64(std::uint64_t v);

/// Mixes a base seed with stream identifiers into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

using Rng = std::mt19937_64;

/// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix fan_in_uniform(int rows, int cols, int fan_in, Rng& rng);

}  // namespace cmls

#include "cmls/tensor.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace cmls {

void zero_grads(const ParameterRefs& params) {
  for (Parameter* p : params) p->zero_grad();
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fingerprint(const ParameterRefs& params) {
  return fingerprint(ConstParameterRefs(params.begin(), params.end()));
}

std::uint64_t fingerprint(const ConstParameterRefs& params) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const Parameter* p : params) {
    h = fnv1a(p->name, h);
    const auto* data = reinterpret_cast<const char*>(p->value.data());
    h = fnv1a(std::string_view(data, static_cast<std::size_t>(p->value.size()) * sizeof(Real)), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined stream id
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix fan_in_uniform(int rows, int cols, int fan_in, Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in > 0 ? fan_in : 1));
  std::uniform_real_distribution<Real> dist(-bound, bound);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace cmls

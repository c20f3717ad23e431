#include "cmls/safetensors.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cmls/errors.hpp"

namespace cmls {

namespace {

double half_to_double(std::uint16_t h) {
  const std::uint32_t sign = (h >> 15) & 1U, exp = (h >> 10) & 0x1FU, frac = h & 0x3FFU;
  double v;
  if (exp == 0) v = std::ldexp(static_cast<double>(frac), -24);
  else if (exp == 31) v = frac ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  else v = std::ldexp(static_cast<double>(frac | 0x400U), static_cast<int>(exp) - 25);
  return sign ? -v : v;
}

double bf16_to_double(std::uint16_t b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b) << 16;
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

std::map<std::string, SafeTensor> read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResolutionError("cannot open " + path.string());
  std::uint64_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), 8) || header_len > (1ULL << 30))
    throw ParseError(path.string() + ": invalid safetensors header");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) throw ParseError(path.string() + ": truncated header");
  const auto meta = nlohmann::json::parse(header, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) throw ParseError(path.string() + ": header is not a JSON object");
  const std::streamoff base = static_cast<std::streamoff>(8 + header_len);

  std::map<std::string, SafeTensor> out;
  for (const auto& [name, info] : meta.items()) {
    if (name == "__metadata__") continue;
    const std::string dtype = info.at("dtype").get<std::string>();
    std::vector<long> shape = info.at("shape").get<std::vector<long>>();
    const auto offsets = info.at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0]) throw ParseError(path.string() + ": bad offsets for " + name);
    std::size_t width = dtype == "F64" ? 8 : dtype == "F32" ? 4 : (dtype == "F16" || dtype == "BF16") ? 2 : 0;
    if (width == 0) throw ParseError(path.string() + ": unsupported dtype " + dtype + " for " + name);
    long count = 1;
    for (long d : shape) count *= d;
    if (shape.size() > 2) throw ParseError(path.string() + ": tensor " + name + " has rank > 2");
    if (static_cast<std::uint64_t>(count) * width != offsets[1] - offsets[0])
      throw ParseError(path.string() + ": size mismatch for " + name);

    std::vector<unsigned char> raw(offsets[1] - offsets[0]);
    in.seekg(base + static_cast<std::streamoff>(offsets[0]));
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw ParseError(path.string() + ": truncated data for " + name);

    const long rows = shape.size() == 2 ? shape[0] : 1;
    const long cols = shape.empty() ? 1 : shape.back();
    SafeTensor t;
    t.shape = shape;
    t.data.resize(rows, cols);
    for (long i = 0; i < count; ++i) {
      const unsigned char* p = raw.data() + static_cast<std::size_t>(i) * width;
      double v;
      if (dtype == "F64") std::memcpy(&v, p, 8);
      else if (dtype == "F32") {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else {
        std::uint16_t h;
        std::memcpy(&h, p, 2);
        v = dtype == "F16" ? half_to_double(h) : bf16_to_double(h);
      }
      t.data(i / cols, i % cols) = v;  // row-major on disk
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace cmls

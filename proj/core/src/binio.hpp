#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "cmls/errors.hpp"
#include "cmls/tensor.hpp"

namespace cmls::bin {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError(std::string("truncated file reading ") + what);
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const char* what, std::uint32_t max_len = 1u << 26) {
  const auto n = get<std::uint32_t>(in, what);
  if (n > max_len) throw ParseError(std::string("implausible length reading ") + what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw ParseError(std::string("truncated file reading ") + what);
  return s;
}

inline void put_matrix(std::ostream& out, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline Matrix get_matrix(std::istream& in, const char* what) {
  const auto r = get<std::uint32_t>(in, what);
  const auto c = get<std::uint32_t>(in, what);
  if (std::uint64_t{r} * c > (1ull << 32)) throw ParseError(std::string("implausible shape reading ") + what);
  Matrix m(r, c);
  if (m.size() && !in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size())))
    throw ParseError(std::string("truncated file reading ") + what);
  return m;
}

}  // namespace cmls::bin

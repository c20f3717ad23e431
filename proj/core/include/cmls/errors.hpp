#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmls {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input parsed fine but violates a contract (unknown label, bad config, shape).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A named resource (pretrained model, dataset layout) could not be located.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmls

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vaxcov {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file content. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Data that parsed fine but violates a dataset invariant (duplicate keys,
/// missing denominators, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vaxcov

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace encdns {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad label, bad port, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `offset` is the byte offset (wire data) or
/// line number (text files) at which parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A file or lookup backend could not be read. Distinct from "no record".
class IoError : public Error {
 public:
  using Error::Error;
};

/// Statistical input that has no defined answer (constant series, zero
/// denominators, too few points).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace encdns

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace distag {

// Bad argument passed to a library call (non-positive temperature, shape
// mismatch, unknown label, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (files, manifests, vocabularies).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Training produced a non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of the autodiff tape (e.g. backward twice).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace distag

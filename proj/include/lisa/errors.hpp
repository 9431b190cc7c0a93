#pragma once

#include <stdexcept>
#include <string>

namespace lisa {

/// Base of every exception thrown by the library. The CLI maps these to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, non-finite values, bad configuration.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A codeword id (or similar index) is outside its valid range.
class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// A value cannot be represented (overflow, NaN in a table).
class NumericRange : public Error {
 public:
  using Error::Error;
};

/// An internal invariant did not hold. Indicates a bug or corrupted input
/// that slipped past validation.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Inference was requested on a streaming state that has consumed nothing.
class EmptyHistory : public Error {
 public:
  using Error::Error;
};

}  // namespace lisa

#define LISA_REQUIRE(cond, ExceptionType, msg) \
  do {                                         \
    if (!(cond)) {                             \
      throw ExceptionType(msg);                \
    }                                          \
  } while (0)

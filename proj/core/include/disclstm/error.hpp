#pragma once

#include <stdexcept>
#include <string>

namespace disclstm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data: corpus files, embedding stores,
/// checkpoints, configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not fit the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of an API contract (e.g. double backward, invalid configuration).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace disclstm

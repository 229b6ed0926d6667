#pragma once

#include <stdexcept>
#include <string>

namespace prise {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor extents disagree with an operation's contract.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

/// A dataset file, record, pool file, or checkpoint is malformed or missing.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

/// A value that must be finite is not (loss, gradient, score).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// Command-line misuse that the flag parser did not already reject.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

}  // namespace prise

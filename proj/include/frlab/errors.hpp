#pragma once

#include <stdexcept>
#include <string>

namespace frlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative decomposition failed to converge.
class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& what, long rows, long cols)
      : Error(what + " (" + std::to_string(rows) + "x" + std::to_string(cols) + ")"),
        rows_(rows),
        cols_(cols) {}
  long rows() const { return rows_; }
  long cols() const { return cols_; }

 private:
  long rows_;
  long cols_;
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

class NotPsd : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// A model fails one of its full-rank assumptions.
class ModelDegenerate : public Error {
 public:
  using Error::Error;
};

/// A dense p x p object would be required beyond the configured cap.
class UnsupportedSize : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace frlab

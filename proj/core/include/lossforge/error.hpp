#pragma once

#include <stdexcept>
#include <string>

namespace lossforge {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (dimension mismatch, stale cache, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation (NaN input, negative
/// epsilon, label not in {-1, +1}, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace lossforge

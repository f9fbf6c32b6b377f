#pragma once

#include <stdexcept>
#include <string>

namespace mhd25 {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field shapes or grids disagree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Density 1 + a fell to (or below) the vacuum guard.
class VacuumError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in a state or tendency.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, snapshot or CSV input.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace mhd25

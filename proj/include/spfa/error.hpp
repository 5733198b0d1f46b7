#pragma once

#include <stdexcept>
#include <string>

namespace spfa {

// Base for every error the library raises. The CLI maps these to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: wrong dimensions, invalid flags, malformed files.
class InputError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but carries no usable information (constant column,
// all-zero loadings).
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

// An iterative routine failed outright (not a soft non-convergence, which is
// reported through flags on the result).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A score predictor was requested under a rotation mode it does not support.
class ModeError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spfa

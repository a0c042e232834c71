#pragma once

#include <stdexcept>
#include <string>

namespace ecbc {

// Bad user data or arguments (non-finite values, wrong shapes, invalid
// parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A point or parameter outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An oracle-scale size or cost guard refused the computation.
class GuardExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

// A numerical procedure failed to produce a certified answer.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecbc

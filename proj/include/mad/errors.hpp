#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mad {

// Argument outside the mathematical domain of an operation (negative Bessel
// argument, zero probability on a support point, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Result not representable in double precision; callers should switch to the
// scaled variant.
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

// Input at a singular point of a formula, e.g. the origin for sphere scores.
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Shape or configuration mismatch detected before any work is done.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Monte-Carlo estimate whose effective sample size is too small to trust.
class UnreliableEstimateError : public std::runtime_error {
 public:
  UnreliableEstimateError(const std::string& what, double ess)
      : std::runtime_error(what), ess_(ess) {}
  double ess() const noexcept { return ess_; }

 private:
  double ess_;
};

// NaN/Inf encountered during integration or training.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed line in an input file; line numbers are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Closure of a symmetry group did not reach a fixed point.
class ClosureError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mad

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsforest {

// Distribution parameter outside its support (non-positive scale, empty interval, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Truncation region so far in the tail that no finite draw can be produced.
class TailOverflowError : public std::runtime_error {
 public:
  explicit TailOverflowError(const std::string& what, std::ptrdiff_t row = -1)
      : std::runtime_error(what), row_(row) {}
  std::ptrdiff_t row() const noexcept { return row_; }

 private:
  std::ptrdiff_t row_;
};

// Malformed or inconsistent user input (shapes, labels, files).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an internal routine was violated.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Point estimation that could not be carried out (no events, no convergence, one arm).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Chain produced a non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hsforest

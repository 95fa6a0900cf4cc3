#pragma once

#include <stdexcept>
#include <string>

namespace cylmode {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (sizes, ranges, exponents).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A point or field lies outside the discretized domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A linear system that must be invertible turned out singular.
class SingularOperator : public Error {
 public:
  using Error::Error;
};

// The explicit part of the time step exceeds its stability limit.
class CflViolation : public Error {
 public:
  CflViolation(const std::string& what, int limiting_mode, double dt_max)
      : Error(what), limiting_mode_(limiting_mode), dt_max_(dt_max) {}
  int limiting_mode() const { return limiting_mode_; }
  double dt_max() const { return dt_max_; }

 private:
  int limiting_mode_;
  double dt_max_;
};

// Reading or writing a file failed, or the file content is corrupt.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cylmode

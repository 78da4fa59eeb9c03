#pragma once

#include <stdexcept>
#include <string>

namespace mmcd {

/// Failure category. The CLI maps these onto its exit codes.
enum class ErrorKind {
  input,         // malformed files or configuration
  precondition,  // a documented precondition does not hold
  numerical,     // factorization failure, degenerate data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what)
      : Error(ErrorKind::precondition, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

}  // namespace mmcd

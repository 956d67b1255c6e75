#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ostop {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text; offset() is the byte position of the offending token.
class SyntaxError : public Error {
public:
  SyntaxError(std::size_t offset, const std::string& what)
      : Error("syntax error at offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Evaluation outside the domain of an operation (log of a non-positive number, division by zero, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// A derivative was requested exactly at a point where a min/max/abs branch changes.
class KinkError : public Error {
public:
  explicit KinkError(double x)
      : Error("derivative requested at a branch tie x=" + std::to_string(x) + "; use one-sided evaluation"), x_(x) {}
  double location() const noexcept { return x_; }

private:
  double x_;
};

class QuadratureError : public Error {
public:
  using Error::Error;
};

class IntegrabilityError : public Error {
public:
  using Error::Error;
};

class NoBoundaryCondition : public Error {
public:
  using Error::Error;
};

class OrderError : public Error {
public:
  using Error::Error;
};

class NoThreshold : public Error {
public:
  using Error::Error;
};

class DegenerateConditioning : public Error {
public:
  using Error::Error;
};

class BoundaryConditionError : public Error {
public:
  using Error::Error;
};

class NonPositivePayoffAtThreshold : public Error {
public:
  using Error::Error;
};

class EmptyRegion : public Error {
public:
  using Error::Error;
};

class NoBracket : public Error {
public:
  using Error::Error;
};

class SchemeMismatch : public Error {
public:
  using Error::Error;
};

class TooFewConditioningSamples : public Error {
public:
  using Error::Error;
};

/// An operation was called on inputs that violate its documented precondition.
class PreconditionError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace ostop

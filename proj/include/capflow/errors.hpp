#pragma once

#include <stdexcept>
#include <string>

namespace capflow {

// Engine errors are all derived from Error so callers can catch one type.
// Each condition named by the module contracts gets its own class.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A point left the domain/truncation and the operation cannot proceed.
class DomainError : public Error {
public:
  using Error::Error;
};

// Invalid parameter value for a function family or model.
class ParamError : public Error {
public:
  using Error::Error;
};

// Malformed or inconsistent configuration input.
class ConfigError : public Error {
public:
  using Error::Error;
};

// An iterative procedure hit its iteration cap without meeting tolerance.
class NoConvergence : public Error {
public:
  using Error::Error;
};

// A distribution carries (numerically) zero mass where positive mass is required.
class ZeroMass : public Error {
public:
  using Error::Error;
};

// Two distributions that must share a grid do not.
class GridMismatch : public Error {
public:
  using Error::Error;
};

// No fixed point found where at least one is required.
class NoFixedPoint : public Error {
public:
  using Error::Error;
};

// A likelihood ratio is undefined (zero denominator inside the support).
class UndefinedRatio : public Error {
public:
  using Error::Error;
};

// A tangent fixed point (tau'(s) == 1 within tolerance) blocks classification.
class TangentPresent : public Error {
public:
  using Error::Error;
};

// Closed-form optimum beaten by a brute-force probe beyond tolerance.
class OptimMismatch : public Error {
public:
  using Error::Error;
};

// Lower capital support dropped below 1 in the endogenous model.
class InteriorityViolation : public Error {
public:
  using Error::Error;
};

// Filesystem / serialization failure.
class IOError : public Error {
public:
  using Error::Error;
};

} // namespace capflow

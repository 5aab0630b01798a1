#pragma once

#include <stdexcept>
#include <string>

namespace homlab {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent user configuration. The CLI maps this to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Any failure of the numerics themselves. The CLI maps this family to exit status 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A coefficient field failed one of the structural assumptions (symmetry,
/// ellipticity, periodicity). `condition()` names the failing one.
class AssumptionViolation : public NumericalError {
 public:
  AssumptionViolation(std::string condition, const std::string& detail)
      : NumericalError("assumption violated (" + condition + "): " + detail),
        condition_(std::move(condition)) {}
  const std::string& condition() const noexcept { return condition_; }

 private:
  std::string condition_;
};

class GeometryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// h > eps/8 on an oscillating-coefficient assembly.
class ResolutionError : public NumericalError {
 public:
  ResolutionError(const std::string& what, int required_n)
      : NumericalError(what), required_n_(required_n) {}
  int required_n() const noexcept { return required_n_; }

 private:
  int required_n_;
};

/// Iterative solver hit its iteration cap.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double final_residual, int iterations)
      : NumericalError(what + " (relative residual " + std::to_string(final_residual) + " after " +
                       std::to_string(iterations) + " iterations)"),
        final_residual_(final_residual),
        iterations_(iterations) {}
  double final_residual() const noexcept { return final_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double final_residual_;
  int iterations_;
};

/// Inputs for which a ratio or range is undefined (zero denominators).
class DegenerateInput : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A computed object failed a self-consistency check (e.g. ellipticity of the homogenized tensor).
class ConsistencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace homlab

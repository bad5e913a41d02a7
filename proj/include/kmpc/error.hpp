#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kmpc {

// Base of every error thrown by the library. kind() is the machine-readable
// tag the CLI prints on failure.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define KMPC_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(what) {}         \
    const char* kind() const noexcept override { return #Name; }    \
  };

KMPC_DEFINE_ERROR(ArgumentError)
KMPC_DEFINE_ERROR(IndexError)
KMPC_DEFINE_ERROR(ShapeError)
KMPC_DEFINE_ERROR(IntegrationError)
KMPC_DEFINE_ERROR(ScalerError)
KMPC_DEFINE_ERROR(ParseError)
KMPC_DEFINE_ERROR(UsageError)
KMPC_DEFINE_ERROR(MetricError)
KMPC_DEFINE_ERROR(SingularityError)

#undef KMPC_DEFINE_ERROR

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long epoch)
      : Error(what), epoch_(epoch) {}
  const char* kind() const noexcept override { return "TrainingError"; }
  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  const char* kind() const noexcept override { return "NonConvergenceError"; }
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Carries every violated field, not just the first one found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const char* kind() const noexcept override { return "ConfigError"; }
  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  std::vector<std::string> violations_;
};

}  // namespace kmpc

#pragma once

#include <stdexcept>
#include <string>

namespace epsrecon {

/// Broad failure classes. The CLI maps them onto stable exit codes.
enum class ErrorClass { io = 1, numerical = 2, config = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), class_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return class_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass class_;
  std::string kind_;
};

#define EPSRECON_DEFINE_ERROR(Name, Class)                                        \
  class Name : public Error {                                                     \
   public:                                                                        \
    explicit Name(const std::string& what) : Error(ErrorClass::Class, #Name, what) {} \
  };

EPSRECON_DEFINE_ERROR(GeometryError, config)
EPSRECON_DEFINE_ERROR(RefinementError, config)
EPSRECON_DEFINE_ERROR(ConfigError, config)
EPSRECON_DEFINE_ERROR(DomainError, numerical)
EPSRECON_DEFINE_ERROR(ShapeError, numerical)
EPSRECON_DEFINE_ERROR(StabilityError, numerical)
EPSRECON_DEFINE_ERROR(CalibrationError, numerical)
EPSRECON_DEFINE_ERROR(IoError, io)
EPSRECON_DEFINE_ERROR(LineSearchStall, numerical)

#undef EPSRECON_DEFINE_ERROR

/// Raised when the explicit solver produces a non-finite value.
class DivergenceError : public Error {
 public:
  DivergenceError(int step, const std::string& what)
      : Error(ErrorClass::numerical, "DivergenceError", what + " (step " + std::to_string(step) + ")"),
        step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace epsrecon

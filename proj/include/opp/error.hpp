#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace opp {

enum class ErrorKind {
  MissingField,
  DimensionMismatch,
  NonPositiveConstant,
  NotAnEquilibrium,
  SingularInitialization,
  NonFiniteState,
  SimulationDiverged,
  SchemeDimensionMismatch,
  LengthMismatch,
  NotSymmetric,
  CombinatoricsTooLarge,
  FilterDiverged,
  InvalidArgument,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by time stepping; carries the step at which the state blew up.
class NonFiniteStateError : public Error {
 public:
  NonFiniteStateError(long step, const std::string& message)
      : Error(ErrorKind::NonFiniteState, message), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace opp

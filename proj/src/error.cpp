#include "opp/error.hpp"

namespace opp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPositiveConstant: return "NonPositiveConstant";
    case ErrorKind::NotAnEquilibrium: return "NotAnEquilibrium";
    case ErrorKind::SingularInitialization: return "SingularInitialization";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::SimulationDiverged: return "SimulationDiverged";
    case ErrorKind::SchemeDimensionMismatch: return "SchemeDimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::CombinatoricsTooLarge: return "CombinatoricsTooLarge";
    case ErrorKind::FilterDiverged: return "FilterDiverged";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace opp

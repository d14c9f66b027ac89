#include "sgraph/error.hpp"

namespace sgraph {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::NonMonotoneStamp: return "NonMonotoneStamp";
    case ErrorCode::UnknownVertex: return "UnknownVertex";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::BadInformation: return "BadInformation";
    case ErrorCode::InvalidRoom: return "InvalidRoom";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyProblem: return "EmptyProblem";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::UnknownRoom: return "UnknownRoom";
    case ErrorCode::NoInsideKeyframes: return "NoInsideKeyframes";
    case ErrorCode::CannotMarginalizeFixed: return "CannotMarginalizeFixed";
    case ErrorCode::CannotMarginalizeFirst: return "CannotMarginalizeFirst";
    case ErrorCode::IsolatedKeyframe: return "IsolatedKeyframe";
    case ErrorCode::OutOfOrderEvent: return "OutOfOrderEvent";
    case ErrorCode::UnknownWallKey: return "UnknownWallKey";
    case ErrorCode::InfeasibleLayout: return "InfeasibleLayout";
    case ErrorCode::TooFewPoses: return "TooFewPoses";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace sgraph

#include "pwh/errors.hpp"

namespace pwh {

std::string_view error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::NormExceedsInjectivityRadius: return "NormExceedsInjectivityRadius";
    case ErrorCode::PointsTooFar: return "PointsTooFar";
    case ErrorCode::PointOnBoundary: return "PointOnBoundary";
    case ErrorCode::IntegrationFailure: return "IntegrationFailure";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::SupportTouchesBoundary: return "SupportTouchesBoundary";
    case ErrorCode::NonpositiveBoundaryDistance: return "NonpositiveBoundaryDistance";
    case ErrorCode::CannotSatisfyEstimates: return "CannotSatisfyEstimates";
    case ErrorCode::OrbitLeavesDomain: return "OrbitLeavesDomain";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::NotHyperbolic: return "NotHyperbolic";
    case ErrorCode::NonpositiveAperture: return "NonpositiveAperture";
    case ErrorCode::TargetTooFar: return "TargetTooFar";
    case ErrorCode::GraphFoldover: return "GraphFoldover";
    case ErrorCode::OutputNotAdmissible: return "OutputNotAdmissible";
    case ErrorCode::IdenticalInputs: return "IdenticalInputs";
    case ErrorCode::CannotSatisfyBothConditions: return "CannotSatisfyBothConditions";
    case ErrorCode::NotCauchyWithinWindow: return "NotCauchyWithinWindow";
    case ErrorCode::ContractionStalled: return "ContractionStalled";
    case ErrorCode::ContainmentFailure: return "ContainmentFailure";
    case ErrorCode::PseudoOrbitInvalid: return "PseudoOrbitInvalid";
    case ErrorCode::ProbeInconclusive: return "ProbeInconclusive";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::AssertionFailure: return "AssertionFailure";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace pwh

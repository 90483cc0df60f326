#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pwh {

enum class ErrorCode {
    NormExceedsInjectivityRadius,
    PointsTooFar,
    PointOnBoundary,
    IntegrationFailure,
    BudgetExceeded,
    SupportTouchesBoundary,
    NonpositiveBoundaryDistance,
    CannotSatisfyEstimates,
    OrbitLeavesDomain,
    NoConvergence,
    DegenerateFrame,
    NotHyperbolic,
    NonpositiveAperture,
    TargetTooFar,
    GraphFoldover,
    OutputNotAdmissible,
    IdenticalInputs,
    CannotSatisfyBothConditions,
    NotCauchyWithinWindow,
    ContractionStalled,
    ContainmentFailure,
    PseudoOrbitInvalid,
    ProbeInconclusive,
    InvariantViolation,
    ConfigError,
    AssertionFailure,
    IoError,
};

std::string_view error_name(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI exit-status mapping) can branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace pwh

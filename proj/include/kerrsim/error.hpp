#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kerrsim {

enum class ErrorCode {
    InvalidParameter,
    DivergentInductance,
    RootBracketingFailure,
    NonpositiveKerr,
    UpperBoundViolated,
    NonpositiveDetuning,
    BelowBifurcation,
    StepSizeTooLarge,
    NonconvergentBranches,
    GridTooNarrow,
    RangeNotSpanned,
    LinearityViolated,
    UncoupledMode,
    BiasDrift,
    NotConverged,
    InsufficientSpan,
    DegenerateData,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Configuration and IO problems map to CLI exit code 2, everything else to 3.
bool is_config_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace kerrsim

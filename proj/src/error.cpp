#include "kerrsim/error.hpp"

namespace kerrsim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::DivergentInductance: return "DivergentInductance";
        case ErrorCode::RootBracketingFailure: return "RootBracketingFailure";
        case ErrorCode::NonpositiveKerr: return "NonpositiveKerr";
        case ErrorCode::UpperBoundViolated: return "UpperBoundViolated";
        case ErrorCode::NonpositiveDetuning: return "NonpositiveDetuning";
        case ErrorCode::BelowBifurcation: return "BelowBifurcation";
        case ErrorCode::StepSizeTooLarge: return "StepSizeTooLarge";
        case ErrorCode::NonconvergentBranches: return "NonconvergentBranches";
        case ErrorCode::GridTooNarrow: return "GridTooNarrow";
        case ErrorCode::RangeNotSpanned: return "RangeNotSpanned";
        case ErrorCode::LinearityViolated: return "LinearityViolated";
        case ErrorCode::UncoupledMode: return "UncoupledMode";
        case ErrorCode::BiasDrift: return "BiasDrift";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::InsufficientSpan: return "InsufficientSpan";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_config_error(ErrorCode code) {
    return code == ErrorCode::ConfigError || code == ErrorCode::IoError ||
           code == ErrorCode::InvalidParameter;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace kerrsim

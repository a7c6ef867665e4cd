#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace driftgate {

enum class ErrorCode {
    NonFiniteInput,
    SingularCovariance,
    ZeroVector,
    EmptyInput,
    InvalidProbabilityRow,
    DegenerateLabels,
    MissingClass,
    ZeroBaseline,
    ParseError,
    DimensionMismatch,
    RepCountMismatch,
    UnknownFold,
    MissingPrediction,
    InvalidConfig,
    InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidProbabilityRow: return "InvalidProbabilityRow";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RepCountMismatch: return "RepCountMismatch";
    case ErrorCode::UnknownFold: return "UnknownFold";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace driftgate

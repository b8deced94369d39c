#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grdd {

/// Stable error codes. The string form is part of the CLI's machine-readable
/// error records, so existing names must not change.
enum class ErrorCode {
    ShapeMismatch,
    SpaceMismatch,
    NonFinite,
    InvariantViolation,
    AntipodalPoints,
    TransportOutOfSpace,
    EmbeddingUnavailable,
    InverseInfeasible,
    LogExpUnavailable,
    DegenerateWindow,
    EmptyInput,
    SolverDiverged,
    MissingTreatment,
    MissingAssignment,
    WeakCompliance,
    EmptyStratum,
    ExpOutOfDomain,
    InsufficientData,
    InvertedBounds,
    AllWindowsDegenerate,
    CampaignFailed,
    ParseError,
    MixedSpaces,
    InvalidArgument,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SpaceMismatch: return "SpaceMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::AntipodalPoints: return "AntipodalPoints";
    case ErrorCode::TransportOutOfSpace: return "TransportOutOfSpace";
    case ErrorCode::EmbeddingUnavailable: return "EmbeddingUnavailable";
    case ErrorCode::InverseInfeasible: return "InverseInfeasible";
    case ErrorCode::LogExpUnavailable: return "LogExpUnavailable";
    case ErrorCode::DegenerateWindow: return "DegenerateWindow";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::MissingTreatment: return "MissingTreatment";
    case ErrorCode::MissingAssignment: return "MissingAssignment";
    case ErrorCode::WeakCompliance: return "WeakCompliance";
    case ErrorCode::EmptyStratum: return "EmptyStratum";
    case ErrorCode::ExpOutOfDomain: return "ExpOutOfDomain";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvertedBounds: return "InvertedBounds";
    case ErrorCode::AllWindowsDegenerate: return "AllWindowsDegenerate";
    case ErrorCode::CampaignFailed: return "CampaignFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MixedSpaces: return "MixedSpaces";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

} // namespace grdd

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace greenflow {

enum class ErrorCode {
    InvalidArgument,
    Io,
    UnknownMagic,
    TruncatedRecord,
    MalformedHeader,
    MalformedLabelFile,
    ColumnCountMismatch,
    NonNumericFeature,
    InvalidClass,
    EmptyNode,
    EmptyDataset,
    VersionMismatch,
    CorruptModel,
    LengthMismatch,
    CounterUnavailable,
    BelowResolution,
    MissingDefaultTrial,
    MissingMetadata,
    MeasurementBusy,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::UnknownMagic: return "UnknownMagic";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MalformedLabelFile: return "MalformedLabelFile";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::NonNumericFeature: return "NonNumericFeature";
    case ErrorCode::InvalidClass: return "InvalidClass";
    case ErrorCode::EmptyNode: return "EmptyNode";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::CounterUnavailable: return "CounterUnavailable";
    case ErrorCode::BelowResolution: return "BelowResolution";
    case ErrorCode::MissingDefaultTrial: return "MissingDefaultTrial";
    case ErrorCode::MissingMetadata: return "MissingMetadata";
    case ErrorCode::MeasurementBusy: return "MeasurementBusy";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can branch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace greenflow

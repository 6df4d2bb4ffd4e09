#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dfkg {

enum class ErrorCode {
    RootNotFound,
    CorruptDatabase,
    TableNotFound,
    InvalidParts,
    EmptyBatch,
    OutOfRangeEpoch,
    UnknownZone,
    DanglingUid,
    UnknownEdge,
    IllegalTransition,
    RunNotFound,
    StageNotReady,
    UnknownUid,
    CustodyBreach,
    InvalidConfig,
    InvalidInput,
    RunLocked,
    Io,
    EngineFailure,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a stable error code; the code name is what the CLI
/// and the HTTP API report to callers.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code),
          detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace dfkg

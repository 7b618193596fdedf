#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace templar {

enum class ErrorCode {
    DegenerateConfiguration,
    ImageTooSmall,
    InsufficientData,
    ShapeMismatch,
    FormatError,
    CorruptPayload,
    DimMismatch,
    InsufficientClasses,
    DegenerateProtocol,
    MissingMate,
    EmptyInput,
    ParseError,
    ConsistencyError,
    InvalidArgument,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code so the
/// CLI can map it onto an exit status and tests can match on it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace templar

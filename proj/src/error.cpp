#include "templar/error.hpp"

namespace templar {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::CorruptPayload: return "CorruptPayload";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::InsufficientClasses: return "InsufficientClasses";
        case ErrorCode::DegenerateProtocol: return "DegenerateProtocol";
        case ErrorCode::MissingMate: return "MissingMate";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ConsistencyError: return "ConsistencyError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace templar

#include "ctfkit/error.hpp"

namespace ctfkit {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::QuantileOutOfDomain: return "QuantileOutOfDomain";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::NotRepresentable: return "NotRepresentable";
    case ErrorCode::CorrMatrixInconsistent: return "CorrMatrixInconsistent";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::CholeskyFailed: return "CholeskyFailed";
    case ErrorCode::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MissingRowSource: return "MissingRowSource";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::NodeNotModeled: return "NodeNotModeled";
    case ErrorCode::SecondaryFitDiverged: return "SecondaryFitDiverged";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::WrongWorldCount: return "WrongWorldCount";
    case ErrorCode::RequestTooLarge: return "RequestTooLarge";
    case ErrorCode::AddressInUse: return "AddressInUse";
  }
  return "Unknown";
}

}  // namespace ctfkit

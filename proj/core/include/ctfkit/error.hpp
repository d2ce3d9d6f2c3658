#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctfkit {

enum class ErrorCode {
  InvalidArgument,
  CycleDetected,
  IndexOutOfRange,
  QuantileOutOfDomain,
  LengthMismatch,
  DimensionMismatch,
  EmptySample,
  NotRepresentable,
  CorrMatrixInconsistent,
  NotPSD,
  CholeskyFailed,
  NonFiniteOutput,
  NonFiniteLoss,
  InsufficientData,
  MissingRowSource,
  ArityMismatch,
  NodeNotModeled,
  SecondaryFitDiverged,
  MissingColumn,
  ParseError,
  FormatVersionMismatch,
  CorruptFile,
  IoError,
  ConfigError,
  UsageError,
  WrongWorldCount,
  RequestTooLarge,
  AddressInUse,
};

// Stable identifier printed as `error_code: message` and returned by the
// explorer service.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ctfkit

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace znn {

enum class ErrorCode {
  InvalidHeader,
  BadMagic,
  UnsupportedVersion,
  Overflow,
  MisalignedInput,
  LengthMismatch,
  EmptyInput,
  CorruptTable,
  TruncatedPayload,
  ExcessBits,
  CorruptPayload,
  ChecksumMismatch,
  BaseDigestMismatch,
  InvalidPeriod,
  OpaqueUnsupported,
  MalformedHeader,
  OverlappingSpans,
  SpanOutOfBounds,
  InvalidConfig,
  Io,
};

std::string_view error_name(ErrorCode code) noexcept;

// Coarse classification used by the CLI to pick an exit status.
enum class ErrorKind { Usage, Data, Io };
ErrorKind error_kind(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace znn

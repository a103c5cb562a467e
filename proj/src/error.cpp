#include "znn/error.hpp"

namespace znn {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidHeader: return "INVALID_HEADER";
    case ErrorCode::BadMagic: return "BAD_MAGIC";
    case ErrorCode::UnsupportedVersion: return "UNSUPPORTED_VERSION";
    case ErrorCode::Overflow: return "OVERFLOW";
    case ErrorCode::MisalignedInput: return "MISALIGNED_INPUT";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::CorruptTable: return "CORRUPT_TABLE";
    case ErrorCode::TruncatedPayload: return "TRUNCATED_PAYLOAD";
    case ErrorCode::ExcessBits: return "EXCESS_BITS";
    case ErrorCode::CorruptPayload: return "CORRUPT_PAYLOAD";
    case ErrorCode::ChecksumMismatch: return "CHECKSUM_MISMATCH";
    case ErrorCode::BaseDigestMismatch: return "BASE_DIGEST_MISMATCH";
    case ErrorCode::InvalidPeriod: return "INVALID_PERIOD";
    case ErrorCode::OpaqueUnsupported: return "OPAQUE_UNSUPPORTED";
    case ErrorCode::MalformedHeader: return "MALFORMED_HEADER";
    case ErrorCode::OverlappingSpans: return "OVERLAPPING_SPANS";
    case ErrorCode::SpanOutOfBounds: return "SPAN_OUT_OF_BOUNDS";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::Io: return "IO_ERROR";
  }
  return "UNKNOWN";
}

ErrorKind error_kind(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidPeriod:
    case ErrorCode::OpaqueUnsupported:
      return ErrorKind::Usage;
    case ErrorCode::Io:
      return ErrorKind::Io;
    default:
      return ErrorKind::Data;
  }
}

}  // namespace znn

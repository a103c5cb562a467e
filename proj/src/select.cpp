#include <algorithm>

#include "znn/analysis.hpp"
#include "znn/entropy.hpp"
#include "znn/error.hpp"

namespace znn {

Method select_method(ByteView input, SelectionMode mode) {
  if (input.empty()) fail(ErrorCode::EmptyInput, "select_method on empty input");
  switch (mode) {
    case SelectionMode::Model:
    case SelectionMode::ForceHuffman:
      return Method::Huffman;
    case SelectionMode::ForceLz:
      return Method::LzEntropy;
    case SelectionMode::ForceStored:
      return Method::Stored;
    case SelectionMode::DeltaAuto:
      break;
  }
  const ZeroStats z = zero_stats(input);
  const bool mostly_zero = z.zero_fraction > kAutoZeroFraction;
  const bool long_run = static_cast<double>(z.longest_zero_run) >= kAutoZeroRunFraction * static_cast<double>(input.size());
  return (mostly_zero || long_run) ? Method::LzEntropy : Method::Huffman;
}

GroupEncoding encode_group(ByteView input, Method method) {
  if (method == Method::Huffman) return huffman_compress(input);
  return encode_group(input, method, Histogram{});
}

GroupEncoding encode_group(ByteView input, Method method, const Histogram& histogram) {
  if (input.empty()) fail(ErrorCode::EmptyInput, "encode_group on empty input");
  switch (method) {
    case Method::Huffman:
      return huffman_compress(input, histogram);
    case Method::LzEntropy:
      return lz_entropy_compress(input);
    case Method::ZeroTruncated:
    case Method::Stored:
      break;
  }
  GroupEncoding enc;
  enc.raw_len = input.size();
  if (method == Method::ZeroTruncated) {
    if (!std::all_of(input.begin(), input.end(), [](std::uint8_t b) { return b == 0; }))
      fail(ErrorCode::InvalidConfig, "ZERO_TRUNCATED requested for nonzero input");
    enc.method = Method::ZeroTruncated;
    return enc;
  }
  enc.method = Method::Stored;
  enc.payload.assign(input.begin(), input.end());
  return enc;
}

void decode_group(Method method, ByteView payload, MutableByteView out) {
  switch (method) {
    case Method::Stored:
      if (payload.size() != out.size()) fail(ErrorCode::LengthMismatch, "STORED group length mismatch");
      std::copy(payload.begin(), payload.end(), out.begin());
      return;
    case Method::ZeroTruncated:
      if (!payload.empty()) fail(ErrorCode::CorruptPayload, "ZERO_TRUNCATED group with payload");
      std::fill(out.begin(), out.end(), std::uint8_t{0});
      return;
    case Method::Huffman:
      huffman_decompress_into(payload, out);
      return;
    case Method::LzEntropy:
      lz_entropy_decompress_into(payload, out);
      return;
  }
  fail(ErrorCode::CorruptPayload, "unknown method tag");
}

}  // namespace znn

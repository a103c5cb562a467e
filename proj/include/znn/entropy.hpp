#pragma once

#include <array>
#include <cstdint>

#include "znn/bytes.hpp"
#include "znn/format.hpp"

namespace znn {

using Histogram = std::array<std::uint64_t, 256>;

Histogram byte_histogram(ByteView input);

struct GroupEncoding {
  Method method = Method::Stored;
  Bytes payload;
  std::size_t raw_len = 0;
};

// ---------------------------------------------------------------------------
// Huffman
//
// Payload layout: 128 bytes of code lengths, two 4-bit lengths per byte
// (symbol 2i in the low nibble, 2i+1 in the high nibble), followed by the
// code bits packed LSB-first. Codes are canonical, assigned in
// (length, symbol) order and emitted bit-reversed so the decoder can index
// a 4096-entry table with the next 12 stream bits. The stream is padded
// with zero bits to a byte boundary.

inline constexpr unsigned kMaxCodeLength = 12;
inline constexpr std::size_t kHuffmanTableBytes = 128;

struct HuffmanTable {
  std::array<std::uint8_t, 256> lengths{};

  // Optimal prefix code with no length above kMaxCodeLength (package-merge).
  // Ties are broken by symbol value.
  static HuffmanTable build(const Histogram& histogram);

  std::uint64_t cost_bits(const Histogram& histogram) const;
  // Sum of 2^(max-len) over used symbols; a valid table has kraft_sum <= 4096.
  std::uint32_t kraft_sum() const;
  std::array<std::uint16_t, 256> canonical_codes() const;
};

GroupEncoding huffman_compress(ByteView input);
// Same, reusing a histogram the caller already has.
GroupEncoding huffman_compress(ByteView input, const Histogram& histogram);
// Encoded payload size (table included) without encoding.
std::uint64_t huffman_encoded_size(const Histogram& histogram);

Bytes huffman_decompress(ByteView payload, std::size_t raw_len);
void huffman_decompress_into(ByteView payload, MutableByteView out);

// ---------------------------------------------------------------------------
// LZ + entropy backend (zstd frames). Backend id 0 in the container flags.

inline constexpr int kLzLevel = 3;

GroupEncoding lz_entropy_compress(ByteView input);
Bytes lz_entropy_decompress(ByteView payload, std::size_t raw_len);
void lz_entropy_decompress_into(ByteView payload, MutableByteView out);

// ---------------------------------------------------------------------------
// Method selection

enum class SelectionMode { Model, DeltaAuto, ForceHuffman, ForceLz, ForceStored };

inline constexpr double kAutoZeroFraction = 0.90;
inline constexpr double kAutoZeroRunFraction = 0.03;

Method select_method(ByteView input, SelectionMode mode);

// Encodes with the chosen method. All-zero input becomes ZERO_TRUNCATED
// (except under ForceStored); encoders that do not shrink the input fall
// back to STORED.
GroupEncoding encode_group(ByteView input, Method method);
GroupEncoding encode_group(ByteView input, Method method, const Histogram& histogram);
void decode_group(Method method, ByteView payload, MutableByteView out);

}  // namespace znn

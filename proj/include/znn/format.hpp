#pragma once

// On-disk layout of a .znn container (all integers little-endian):
//
//   offset  size  field
//        0     4  magic "ZNN1"
//        4     1  version (1)
//        5     1  flags: bit0 delta, bit1 safetensors payload, bits 2-3 reserved,
//                 bits 4-7 LZ backend id (0 = zstd)
//        6     1  dtype code
//        7     1  group count
//        8     4  chunk size (uncompressed bytes per chunk)
//       12     8  total uncompressed size
//       20     8  chunk count
//       28    32  SHA-256 of the base (delta containers only)
//
// followed by the chunk table (chunk_count x group_count records of
// {u8 method, u32 stored_len}, chunk-major), the concatenated group payloads
// in the same order, and a trailing u32 CRC-32C of the payload.

#include <array>
#include <cstdint>
#include <vector>

#include "znn/bytes.hpp"
#include "znn/digest.hpp"
#include "znn/dtype.hpp"

namespace znn {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'Z', 'N', 'N', '1'};
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kFixedHeaderSize = 28;
inline constexpr std::size_t kDeltaHeaderSize = kFixedHeaderSize + 32;
inline constexpr std::size_t kRecordSize = 5;
inline constexpr std::size_t kChecksumSize = 4;
inline constexpr std::uint32_t kDefaultChunkSize = 256 * 1024;

inline constexpr std::uint8_t kFlagDelta = 0x01;
inline constexpr std::uint8_t kFlagSafetensors = 0x02;
inline constexpr std::uint8_t kFlagReservedMask = 0x0C;

enum class Method : std::uint8_t { Stored = 0, Huffman = 1, LzEntropy = 2, ZeroTruncated = 3 };

std::string_view method_name(Method m);

struct ChunkGroupRecord {
  Method method = Method::Stored;
  std::uint32_t stored_len = 0;

  friend bool operator==(const ChunkGroupRecord&, const ChunkGroupRecord&) = default;
};

struct ContainerHeader {
  DType dtype = DType::opaque();
  bool delta = false;
  bool safetensors = false;
  std::uint8_t lz_backend = 0;
  std::uint32_t chunk_size = kDefaultChunkSize;
  std::uint64_t total_size = 0;
  std::uint64_t chunk_count = 0;
  Sha256Digest base_digest{};

  // Fills chunk_count from total_size and chunk_size.
  static ContainerHeader make(DType dtype, std::uint32_t chunk_size, std::uint64_t total_size);

  std::size_t encoded_size() const { return delta ? kDeltaHeaderSize : kFixedHeaderSize; }
  std::uint64_t chunk_length(std::uint64_t chunk) const;
  std::uint64_t group_length(std::uint64_t chunk) const { return chunk_length(chunk) / dtype.element_bytes; }
  std::uint64_t table_size() const { return chunk_count * dtype.group_count * kRecordSize; }

  friend bool operator==(const ContainerHeader&, const ContainerHeader&) = default;
};

// Throws INVALID_HEADER describing the first violated invariant.
void validate_header(const ContainerHeader& h);

Bytes encode_header(const ContainerHeader& h);
// Needs at least the fixed part (plus the digest for delta containers).
ContainerHeader decode_header(ByteView bytes);

// Prefix sums of stored_len in chunk-major, group-minor order.
class PayloadOffsets {
 public:
  PayloadOffsets() = default;
  PayloadOffsets(std::vector<std::uint64_t> offsets, std::size_t group_count, std::uint64_t total)
      : offsets_(std::move(offsets)), group_count_(group_count), total_(total) {}

  std::uint64_t at(std::uint64_t chunk, std::size_t group) const { return offsets_[chunk * group_count_ + group]; }
  std::uint64_t chunk_begin(std::uint64_t chunk) const { return at(chunk, 0); }
  std::uint64_t payload_size() const { return total_; }
  bool empty() const { return offsets_.empty(); }
  std::size_t size() const { return offsets_.size(); }
  const std::vector<std::uint64_t>& flat() const { return offsets_; }

 private:
  std::vector<std::uint64_t> offsets_;
  std::size_t group_count_ = 1;
  std::uint64_t total_ = 0;
};

PayloadOffsets compute_payload_offsets(std::span<const ChunkGroupRecord> table, std::size_t group_count);

// Checks record/geometry consistency (method tags, STORED and ZERO_TRUNCATED
// lengths) against the header.
void validate_table(const ContainerHeader& h, std::span<const ChunkGroupRecord> table);

void encode_table(std::span<const ChunkGroupRecord> table, Bytes& out);
std::vector<ChunkGroupRecord> decode_table(ByteView bytes, std::size_t record_count);

struct Container {
  ContainerHeader header;
  std::vector<ChunkGroupRecord> table;  // chunk-major
  Bytes payload;
  std::uint32_t checksum = 0;

  const ChunkGroupRecord& record(std::uint64_t chunk, std::size_t group) const {
    return table[chunk * header.dtype.group_count + group];
  }
  std::uint64_t encoded_size() const {
    return header.encoded_size() + table.size() * kRecordSize + payload.size() + kChecksumSize;
  }
  bool checksum_ok() const;

  Bytes serialize() const;
  // Structural parse; the checksum is verified on decompression.
  static Container parse(ByteView bytes);
};

// Size of the container starting at bytes[0], read from its header and table
// only. Used to walk concatenated containers.
std::uint64_t container_extent(ByteView bytes);

}  // namespace znn

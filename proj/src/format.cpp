#include "znn/format.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "znn/crc32c.hpp"
#include "znn/error.hpp"

namespace znn {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Stored: return "STORED";
    case Method::Huffman: return "HUFFMAN";
    case Method::LzEntropy: return "LZ_ENTROPY";
    case Method::ZeroTruncated: return "ZERO_TRUNCATED";
  }
  return "UNKNOWN";
}

ContainerHeader ContainerHeader::make(DType dtype, std::uint32_t chunk_size, std::uint64_t total_size) {
  ContainerHeader h;
  h.dtype = dtype;
  h.chunk_size = chunk_size;
  h.total_size = total_size;
  h.chunk_count = chunk_size == 0 ? 0 : total_size / chunk_size + (total_size % chunk_size != 0 ? 1 : 0);
  return h;
}

std::uint64_t ContainerHeader::chunk_length(std::uint64_t chunk) const {
  if (chunk + 1 < chunk_count) return chunk_size;
  return total_size - (chunk_count - 1) * static_cast<std::uint64_t>(chunk_size);
}

void validate_header(const ContainerHeader& h) {
  const DType& d = h.dtype;
  const auto canonical = dtype_from_code(static_cast<std::uint8_t>(d.code));
  if (!canonical || !(*canonical == d)) fail(ErrorCode::InvalidHeader, "dtype descriptor does not match its code");
  if (h.lz_backend > 0x0F) fail(ErrorCode::InvalidHeader, "lz backend id does not fit in a nibble");
  if (h.lz_backend != 0) fail(ErrorCode::InvalidHeader, "unknown lz backend id " + std::to_string(h.lz_backend));
  if (h.chunk_size == 0) fail(ErrorCode::InvalidHeader, "chunk size is zero");
  if (h.chunk_size % (8u * d.element_bytes) != 0)
    fail(ErrorCode::InvalidHeader,
         "chunk size " + std::to_string(h.chunk_size) + " is not a multiple of " + std::to_string(8 * d.element_bytes));
  const std::uint64_t expected = (h.total_size / h.chunk_size) + (h.total_size % h.chunk_size != 0 ? 1 : 0);
  if (h.chunk_count != expected)
    fail(ErrorCode::InvalidHeader, "chunk count " + std::to_string(h.chunk_count) + " != " + std::to_string(expected));
  if (h.total_size % d.element_bytes != 0) fail(ErrorCode::InvalidHeader, "total size is not a whole number of elements");
}

Bytes encode_header(const ContainerHeader& h) {
  validate_header(h);
  Bytes out;
  out.reserve(h.encoded_size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(kFormatVersion);
  std::uint8_t flags = static_cast<std::uint8_t>(h.lz_backend << 4);
  if (h.delta) flags |= kFlagDelta;
  if (h.safetensors) flags |= kFlagSafetensors;
  out.push_back(flags);
  out.push_back(static_cast<std::uint8_t>(h.dtype.code));
  out.push_back(h.dtype.group_count);
  append_le<std::uint32_t>(out, h.chunk_size);
  append_le<std::uint64_t>(out, h.total_size);
  append_le<std::uint64_t>(out, h.chunk_count);
  if (h.delta) out.insert(out.end(), h.base_digest.begin(), h.base_digest.end());
  return out;
}

ContainerHeader decode_header(ByteView b) {
  if (b.size() < kFixedHeaderSize)
    fail(ErrorCode::InvalidHeader, "need " + std::to_string(kFixedHeaderSize) + " bytes, have " + std::to_string(b.size()));
  if (!std::equal(kMagic.begin(), kMagic.end(), b.begin())) fail(ErrorCode::BadMagic, "not a znn container");
  if (b[4] != kFormatVersion) fail(ErrorCode::UnsupportedVersion, "version " + std::to_string(b[4]));

  const std::uint8_t flags = b[5];
  if (flags & kFlagReservedMask) fail(ErrorCode::InvalidHeader, "reserved flag bits set");
  const auto dtype = dtype_from_code(b[6]);
  if (!dtype) fail(ErrorCode::InvalidHeader, "unknown dtype code " + std::to_string(b[6]));
  if (b[7] != dtype->group_count) fail(ErrorCode::InvalidHeader, "group count does not match dtype");

  ContainerHeader h;
  h.dtype = *dtype;
  h.delta = flags & kFlagDelta;
  h.safetensors = flags & kFlagSafetensors;
  h.lz_backend = flags >> 4;
  h.chunk_size = get_le<std::uint32_t>(&b[8]);
  h.total_size = get_le<std::uint64_t>(&b[12]);
  h.chunk_count = get_le<std::uint64_t>(&b[20]);
  if (h.delta) {
    if (b.size() < kDeltaHeaderSize) fail(ErrorCode::InvalidHeader, "delta header truncated");
    std::copy_n(b.begin() + kFixedHeaderSize, 32, h.base_digest.begin());
  }
  validate_header(h);
  return h;
}

PayloadOffsets compute_payload_offsets(std::span<const ChunkGroupRecord> table, std::size_t group_count) {
  std::vector<std::uint64_t> offsets(table.size());
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    offsets[i] = sum;
    if (table[i].stored_len > std::numeric_limits<std::uint64_t>::max() - sum)
      fail(ErrorCode::Overflow, "payload offsets exceed 64 bits");
    sum += table[i].stored_len;
  }
  return PayloadOffsets(std::move(offsets), group_count == 0 ? 1 : group_count, sum);
}

void validate_table(const ContainerHeader& h, std::span<const ChunkGroupRecord> table) {
  const std::size_t groups = h.dtype.group_count;
  if (table.size() != h.chunk_count * groups) fail(ErrorCode::InvalidHeader, "chunk table size mismatch");
  for (std::uint64_t c = 0; c < h.chunk_count; ++c) {
    const std::uint64_t raw = h.group_length(c);
    for (std::size_t g = 0; g < groups; ++g) {
      const ChunkGroupRecord& r = table[c * groups + g];
      switch (r.method) {
        case Method::Stored:
          if (r.stored_len != raw) fail(ErrorCode::InvalidHeader, "STORED record length differs from group length");
          break;
        case Method::ZeroTruncated:
          if (r.stored_len != 0) fail(ErrorCode::InvalidHeader, "ZERO_TRUNCATED record with payload");
          break;
        case Method::Huffman:
        case Method::LzEntropy:
          if (r.stored_len > raw) fail(ErrorCode::InvalidHeader, "encoded group larger than raw group");
          break;
        default:
          fail(ErrorCode::InvalidHeader, "unknown method tag " + std::to_string(static_cast<int>(r.method)));
      }
    }
  }
}

void encode_table(std::span<const ChunkGroupRecord> table, Bytes& out) {
  const std::size_t at = out.size();
  out.resize(at + table.size() * kRecordSize);
  std::uint8_t* p = out.data() + at;
  for (const ChunkGroupRecord& r : table) {
    p[0] = static_cast<std::uint8_t>(r.method);
    put_le<std::uint32_t>(p + 1, r.stored_len);
    p += kRecordSize;
  }
}

std::vector<ChunkGroupRecord> decode_table(ByteView bytes, std::size_t record_count) {
  if (bytes.size() / kRecordSize < record_count) fail(ErrorCode::InvalidHeader, "chunk table truncated");
  std::vector<ChunkGroupRecord> table(record_count);
  const std::uint8_t* p = bytes.data();
  for (auto& r : table) {
    if (p[0] > 3) fail(ErrorCode::InvalidHeader, "unknown method tag " + std::to_string(p[0]));
    r.method = static_cast<Method>(p[0]);
    r.stored_len = get_le<std::uint32_t>(p + 1);
    p += kRecordSize;
  }
  return table;
}

bool Container::checksum_ok() const { return crc32c(payload) == checksum; }

Bytes Container::serialize() const {
  Bytes out = encode_header(header);
  out.reserve(encoded_size());
  encode_table(table, out);
  out.insert(out.end(), payload.begin(), payload.end());
  append_le<std::uint32_t>(out, checksum);
  return out;
}

namespace {

// Header, table and payload size, checked against the available bytes.
struct Layout {
  ContainerHeader header;
  std::vector<ChunkGroupRecord> table;
  std::size_t table_at = 0;
  std::uint64_t payload_size = 0;
};

Layout read_layout(ByteView bytes) {
  Layout l;
  l.header = decode_header(bytes);
  l.table_at = l.header.encoded_size();
  const std::uint64_t records = l.header.chunk_count * l.header.dtype.group_count;
  if (records > (bytes.size() - l.table_at) / kRecordSize) fail(ErrorCode::InvalidHeader, "chunk table truncated");
  l.table = decode_table(bytes.subspan(l.table_at), records);
  validate_table(l.header, l.table);
  l.payload_size = compute_payload_offsets(l.table, l.header.dtype.group_count).payload_size();
  return l;
}

}  // namespace

Container Container::parse(ByteView bytes) {
  Layout l = read_layout(bytes);
  const std::size_t payload_at = l.table_at + l.table.size() * kRecordSize;
  if (bytes.size() - payload_at < l.payload_size + kChecksumSize)
    fail(ErrorCode::TruncatedPayload, "container shorter than its chunk table implies");
  Container c;
  c.header = l.header;
  c.table = std::move(l.table);
  c.payload.assign(bytes.begin() + payload_at, bytes.begin() + payload_at + l.payload_size);
  c.checksum = get_le<std::uint32_t>(bytes.data() + payload_at + l.payload_size);
  return c;
}

std::uint64_t container_extent(ByteView bytes) {
  Layout l = read_layout(bytes);
  return l.table_at + l.table.size() * kRecordSize + l.payload_size + kChecksumSize;
}

}  // namespace znn

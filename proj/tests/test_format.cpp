#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "znn/crc32c.hpp"
#include "znn/error.hpp"
#include "znn/format.hpp"
#include "znn/pipeline.hpp"

using namespace znn;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a znn::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("header widths add up") {
  // magic, version, flags, dtype, group_count, chunk_size, total_size, chunk_count
  constexpr std::size_t widths[] = {4, 1, 1, 1, 1, 4, 8, 8};
  std::size_t sum = 0;
  for (auto w : widths) sum += w;
  CHECK(sum == kFixedHeaderSize);
  CHECK(sum + 32 == kDeltaHeaderSize);

  auto h = ContainerHeader::make(DType::bf16(), 262144, 0);
  CHECK(h.chunk_count == 0);
  CHECK(encode_header(h).size() == sum);

  h.delta = true;
  h.base_digest = {};
  CHECK(encode_header(h).size() == sum + 32);
}

TEST_CASE("chunk count is a ceiling") {
  CHECK(ContainerHeader::make(DType::fp32(), 262144, 262145).chunk_count == 2);
  CHECK(ContainerHeader::make(DType::fp32(), 262144, 262144).chunk_count == 1);
  auto h = ContainerHeader::make(DType::fp32(), 262144, 262148);
  CHECK(h.chunk_length(0) == 262144);
  CHECK(h.chunk_length(1) == 4);
  CHECK(h.group_length(1) == 1);
}

TEST_CASE("header byte layout") {
  auto h = ContainerHeader::make(DType::fp16(), 1024, 3000);
  h.safetensors = true;
  const Bytes b = encode_header(h);
  CHECK(b[0] == 'Z');
  CHECK(b[3] == '1');
  CHECK(b[4] == 1);
  CHECK(b[5] == kFlagSafetensors);
  CHECK(b[6] == 3);
  CHECK(b[7] == 2);
  CHECK(get_le<std::uint32_t>(&b[8]) == 1024);
  CHECK(get_le<std::uint64_t>(&b[12]) == 3000);
  CHECK(get_le<std::uint64_t>(&b[20]) == 3);
}

TEST_CASE("header round trip over random fields") {
  std::mt19937_64 rng(7);
  const DType dtypes[] = {DType::opaque(), DType::fp32(), DType::bf16(), DType::fp16()};
  for (int i = 0; i < 500; ++i) {
    const DType d = dtypes[rng() % 4];
    const std::uint32_t chunk = static_cast<std::uint32_t>(8 * d.element_bytes * (1 + rng() % 100000));
    const std::uint64_t total = (rng() >> (rng() % 64)) / d.element_bytes * d.element_bytes;
    auto h = ContainerHeader::make(d, chunk, total);
    h.delta = rng() & 1;
    h.safetensors = rng() & 1;
    if (h.delta)
      for (auto& b : h.base_digest) b = static_cast<std::uint8_t>(rng());
    CHECK(decode_header(encode_header(h)) == h);
  }
}

TEST_CASE("header decode errors") {
  Bytes b = encode_header(ContainerHeader::make(DType::bf16(), 262144, 100));
  SUBCASE("bad magic") {
    b[3] = '2';
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::BadMagic);
  }
  SUBCASE("truncated") { CHECK(code_of([&] { decode_header(ByteView(b).first(10)); }) == ErrorCode::InvalidHeader); }
  SUBCASE("version") {
    b[4] = 2;
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::UnsupportedVersion);
  }
  SUBCASE("group count must match dtype") {
    b[7] = 4;
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::InvalidHeader);
  }
  SUBCASE("reserved flag bits") {
    b[5] = 0x04;
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::InvalidHeader);
  }
  SUBCASE("unknown lz backend") {
    b[5] = 0x10;
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::InvalidHeader);
  }
  SUBCASE("chunk count inconsistent") {
    put_le<std::uint64_t>(&b[20], 5);
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::InvalidHeader);
  }
  SUBCASE("delta digest missing") {
    b[5] = kFlagDelta;
    CHECK(code_of([&] { decode_header(b); }) == ErrorCode::InvalidHeader);
  }
}

TEST_CASE("encode_header rejects invalid geometry") {
  auto h = ContainerHeader::make(DType::fp32(), 100, 400);  // not a multiple of 32
  CHECK(code_of([&] { encode_header(h); }) == ErrorCode::InvalidHeader);
  h = ContainerHeader::make(DType::fp32(), 256, 400);
  h.chunk_count = 1;
  CHECK(code_of([&] { encode_header(h); }) == ErrorCode::InvalidHeader);
  h = ContainerHeader::make(DType::opaque(), 0, 0);
  CHECK(code_of([&] { encode_header(h); }) == ErrorCode::InvalidHeader);
}

TEST_CASE("payload offsets are prefix sums") {
  CHECK(compute_payload_offsets({}, 2).empty());

  const std::vector<ChunkGroupRecord> table = {
      {Method::Huffman, 100}, {Method::Stored, 128}, {Method::Huffman, 90}, {Method::Stored, 128}};
  const auto off = compute_payload_offsets(table, 2);
  CHECK(off.at(0, 0) == 0);
  CHECK(off.at(0, 1) == 100);
  CHECK(off.at(1, 0) == 228);
  CHECK(off.at(1, 1) == 318);
  CHECK(off.at(1, 1) + table.back().stored_len == off.payload_size());
}

TEST_CASE("offsets are monotone and telescope for random tables") {
  std::mt19937 rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<ChunkGroupRecord> table(rng() % 200);
    std::uint64_t sum = 0;
    for (auto& r : table) {
      r = {Method::Huffman, static_cast<std::uint32_t>(rng() % 70000)};
      sum += r.stored_len;
    }
    const auto off = compute_payload_offsets(table, 1);
    for (std::size_t i = 1; i < table.size(); ++i) CHECK(off.flat()[i] >= off.flat()[i - 1]);
    CHECK(off.payload_size() == sum);
  }
}

TEST_CASE("crc32c matches the bitwise oracle and the standard check value") {
  const char* check = "123456789";
  CHECK(crc32c(as_bytes_view(check, 9)) == 0xE3069283u);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 1000u, 65537u}) {
    const Bytes b = testing::random_bytes(n, n + 1);
    CHECK(crc32c(b) == reference::crc32c_bitwise(b));
    Crc32c split;
    split.update(ByteView(b).first(n / 3));
    split.update(ByteView(b).subspan(n / 3));
    CHECK(split.value() == crc32c(b));
  }
}

TEST_CASE("container serialize/parse and extent") {
  CompressConfig cfg;
  cfg.dtype = DType::bf16();
  cfg.chunk_size = 4096;
  const Bytes input = testing::gaussian_weights(10000, DType::bf16(), 0.02, 1);
  const Container c = compress_stream(input, cfg);
  const Bytes bytes = c.serialize();
  CHECK(bytes.size() == c.encoded_size());
  CHECK(container_extent(bytes) == bytes.size());
  const Container back = Container::parse(bytes);
  CHECK(back.header == c.header);
  CHECK(back.table == c.table);
  CHECK(back.payload == c.payload);
  CHECK(back.checksum == c.checksum);

  // Trailing data after a container does not change its extent.
  Bytes padded = bytes;
  padded.insert(padded.end(), 17, 0xAB);
  CHECK(container_extent(padded) == bytes.size());
  CHECK(code_of([&] { Container::parse(ByteView(bytes).first(bytes.size() - 5)); }) == ErrorCode::TruncatedPayload);
}

TEST_CASE("table validation") {
  auto h = ContainerHeader::make(DType::bf16(), 64, 64);  // one chunk, groups of 32
  std::vector<ChunkGroupRecord> t = {{Method::Huffman, 20}, {Method::Stored, 32}};
  validate_table(h, t);
  t[1] = {Method::Stored, 31};
  CHECK(code_of([&] { validate_table(h, t); }) == ErrorCode::InvalidHeader);
  t[1] = {Method::ZeroTruncated, 1};
  CHECK(code_of([&] { validate_table(h, t); }) == ErrorCode::InvalidHeader);
  Bytes raw = {9, 0, 0, 0, 0};
  CHECK(code_of([&] { decode_table(raw, 1); }) == ErrorCode::InvalidHeader);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "znn/error.hpp"
#include "znn/model_file.hpp"
#include "znn/safetensors.hpp"

using namespace znn;

namespace {

ErrorCode parse_error(const Bytes& file) {
  try {
    parse_safetensors(file);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

Bytes raw_file(const std::string& json, std::size_t data_len) {
  Bytes out(8);
  put_le<std::uint64_t>(out.data(), json.size());
  out.insert(out.end(), json.begin(), json.end());
  out.resize(out.size() + data_len, 0xAB);
  return out;
}

}  // namespace

TEST_CASE("minimal safetensors file") {
  const Bytes file = raw_file(R"({"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}})", 8);
  const auto layout = parse_safetensors(file);
  REQUIRE(layout.spans.size() == 1);
  CHECK(layout.spans[0].name == "w");
  CHECK(layout.spans[0].dtype.code == DTypeCode::Fp32);
  CHECK(layout.spans[0].end - layout.spans[0].begin == 8);
  CHECK(layout.data_start == file.size() - 8);
}

TEST_CASE("safetensors dtype mapping") {
  CHECK(dtype_from_safetensors("F32").code == DTypeCode::Fp32);
  CHECK(dtype_from_safetensors("BF16").code == DTypeCode::Bf16);
  CHECK(dtype_from_safetensors("F16").code == DTypeCode::Fp16);
  CHECK(dtype_from_safetensors("I8").code == DTypeCode::Opaque);
  CHECK(dtype_from_safetensors("F64").code == DTypeCode::Opaque);
  const Bytes file = raw_file(R"({"q":{"dtype":"I8","shape":[3],"data_offsets":[0,3]}})", 3);
  CHECK(parse_safetensors(file).spans[0].dtype.code == DTypeCode::Opaque);
}

TEST_CASE("safetensors header errors") {
  CHECK(parse_error(raw_file(R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},)"
                             R"("b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}})",
                             12)) == ErrorCode::OverlappingSpans);
  CHECK(parse_error(raw_file(R"({"a":{"dtype":"F32","shape":[4],"data_offsets":[0,16]}})", 8)) ==
        ErrorCode::SpanOutOfBounds);
  CHECK(parse_error(raw_file(R"({"a":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})", 8)) ==
        ErrorCode::MalformedHeader);
  CHECK(parse_error(raw_file("not json", 0)) == ErrorCode::MalformedHeader);
  Bytes short_file(8);
  put_le<std::uint64_t>(short_file.data(), 1000);
  CHECK(parse_error(short_file) == ErrorCode::MalformedHeader);
}

TEST_CASE("segments tile the file") {
  const Bytes file = raw_file(R"({"__metadata__":{"k":"v"},)"
                              R"("b":{"dtype":"BF16","shape":[2],"data_offsets":[8,12]},)"
                              R"("a":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}})",
                              20);
  const auto layout = parse_safetensors(file);
  const auto segs = plan_segments(layout);
  std::uint64_t at = 0;
  for (const auto& s : segs) {
    CHECK(s.offset == at);
    at += s.length;
  }
  CHECK(at == file.size());
  REQUIRE(segs.size() == 5);  // header, a, gap, b, tail
  CHECK(segs[0].name == "__header__");
  CHECK(segs[1].name == "a");
  CHECK(segs[2].dtype.code == DTypeCode::Opaque);
  CHECK(segs[3].name == "b");
}

TEST_CASE("safetensors file round trip") {
  const std::vector<testing::TensorFixture> tensors = {
      {"embed", "BF16", {256, 64}, testing::gaussian_weights(256 * 64, DType::bf16(), 0.02, 1)},
      {"proj", "F32", {128, 32}, testing::gaussian_weights(128 * 32, DType::fp32(), 0.02, 2)},
      {"norm", "F16", {64}, testing::gaussian_weights(64, DType::fp16(), 0.5, 3)},
      {"ids", "I64", {10}, testing::random_bytes(80, 4)},
  };
  const Bytes file = testing::make_safetensors(tensors, R"({"format":"pt"})");
  const std::string in = testing::temp_path("rt.safetensors");
  const std::string packed = testing::temp_path("rt.znn");
  const std::string out = testing::temp_path("rt.out.safetensors");
  testing::write_file(in, file);

  CompressConfig cfg;
  const auto summary = compress_model_file(in, packed, cfg);
  CHECK(summary.safetensors);
  CHECK(summary.raw_size == file.size());
  CHECK(summary.compressed_size == std::filesystem::file_size(packed));

  const auto inspected = inspect_model_file(packed);
  CHECK(inspected.segments.size() == summary.segments.size());
  std::map<std::string, std::size_t> groups;
  for (const auto& s : inspected.segments) groups[s.segment.name] = s.header.dtype.group_count;
  CHECK(groups["embed"] == 2);
  CHECK(groups["proj"] == 4);
  CHECK(groups["norm"] == 2);
  CHECK(groups["ids"] == 1);

  decompress_model_file(packed, out);
  CHECK(testing::read_file(out) == file);
  CHECK(sha256_file(out) == sha256_file(in));
  CHECK(!std::filesystem::exists(out + ".znn-partial"));
}

TEST_CASE("raw mode round trip and corrupt input") {
  const Bytes blob = testing::random_bytes(100003, 5);
  const std::string in = testing::temp_path("blob.bin");
  const std::string packed = testing::temp_path("blob.znn");
  const std::string out = testing::temp_path("blob.out");
  testing::write_file(in, blob);
  CompressConfig cfg;
  const auto s = compress_model_file(in, packed, cfg, IngestMode::Raw);
  CHECK_FALSE(s.safetensors);
  decompress_model_file(packed, out);
  CHECK(testing::read_file(out) == blob);

  Bytes bad = testing::read_file(packed);
  bad[bad.size() / 2] ^= 0x40;
  testing::write_file(packed, bad);
  std::filesystem::remove(out);
  CHECK_THROWS_AS(decompress_model_file(packed, out), Error);
  CHECK_FALSE(std::filesystem::exists(out));
}

TEST_CASE("model file delta and patch") {
  const Bytes w = testing::gaussian_weights(1 << 16, DType::bf16(), 0.02, 6);
  const Bytes w2 = testing::perturb(w, DType::bf16(), 0.3, 1, 7);
  const Bytes f1 = testing::make_safetensors({{"w", "BF16", {1 << 16}, w}});
  const Bytes f2 = testing::make_safetensors({{"w", "BF16", {1 << 16}, w2}});
  const std::string p1 = testing::temp_path("ep1.safetensors"), p2 = testing::temp_path("ep2.safetensors");
  const std::string d = testing::temp_path("ep2.delta.znn"), r = testing::temp_path("ep2r.safetensors");
  testing::write_file(p1, f1);
  testing::write_file(p2, f2);

  CompressConfig cfg;
  const auto s = compress_model_delta(p1, p2, d, cfg);
  CHECK(s.delta);
  CHECK(s.base_digest == sha256_file(p1));
  patch_model_file(p1, d, r);
  CHECK(testing::read_file(r) == f2);

  try {
    patch_model_file(p2, d, r);
    FAIL("expected BASE_DIGEST_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BaseDigestMismatch);
  }
}

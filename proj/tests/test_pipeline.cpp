#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "znn/error.hpp"
#include "znn/pipeline.hpp"

using namespace znn;

namespace {

const DType kAll[] = {DType::opaque(), DType::fp32(), DType::bf16(), DType::fp16()};

CompressConfig config(DType d, std::uint32_t chunk = 4096, int workers = 0) {
  CompressConfig cfg;
  cfg.dtype = d;
  cfg.chunk_size = chunk;
  cfg.worker_count = workers;
  return cfg;
}

// Mixture that exercises every method: zero runs, gaussian weights, noise.
Bytes mixed_payload(std::size_t elements, DType d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bytes out;
  while (out.size() < elements * d.element_bytes) {
    const std::size_t piece = (1 + rng() % 3000) * d.element_bytes;
    switch (rng() % 4) {
      case 0:
        out.insert(out.end(), piece, 0);
        break;
      case 1: {
        const Bytes r = testing::random_bytes(piece, rng());
        out.insert(out.end(), r.begin(), r.end());
        break;
      }
      default: {
        const DType w = d.is_float() ? d : DType::bf16();
        const Bytes g = testing::gaussian_weights(piece / w.element_bytes, w, 0.02, rng());
        out.insert(out.end(), g.begin(), g.end());
        out.resize(out.size() - (out.size() % d.element_bytes));
      }
    }
  }
  out.resize(elements * d.element_bytes);
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  CompressConfig cfg = config(DType::fp32(), 4096);
  CHECK_NOTHROW(cfg.validate());
  cfg.chunk_size = 4100;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.chunk_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = config(DType::bf16());
  cfg.incompressible_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.incompressible_threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("probe state machine") {
  SUBCASE("fresh state probes") {
    GroupProbeState s(2, 15);
    CHECK(s.decide(0) == ProbeDecision::Probe);
    CHECK(s.decide(1) == ProbeDecision::Probe);
  }
  SUBCASE("incompressible probe skips the next window") {
    GroupProbeState s(1, 15);
    REQUIRE(s.decide(0) == ProbeDecision::Probe);  // chunk 1
    s.record(0, true);
    CHECK(s.last_probe_incompressible(0));
    for (int c = 2; c <= 16; ++c) CHECK(s.decide(0) == ProbeDecision::StoreRaw);
    CHECK(s.decide(0) == ProbeDecision::Probe);  // chunk 17
  }
  SUBCASE("compressible probes never skip") {
    GroupProbeState s(1, 15);
    for (int c = 0; c < 100; ++c) {
      CHECK(s.decide(0) == ProbeDecision::Probe);
      s.record(0, false);
    }
  }
  SUBCASE("groups are independent") {
    GroupProbeState s(2, 3);
    s.decide(0);
    s.decide(1);
    s.record(1, true);
    CHECK(s.decide(0) == ProbeDecision::Probe);
    CHECK(s.decide(1) == ProbeDecision::StoreRaw);
    CHECK(s.remaining_skips(1) == 2);
  }
  SUBCASE("zero window") {
    GroupProbeState s(1, 0);
    s.decide(0);
    s.record(0, true);
    CHECK(s.decide(0) == ProbeDecision::Probe);
  }
}

TEST_CASE("round trips across dtypes, lengths and worker counts") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 80; ++t) {
    const DType d = kAll[t % 4];
    const std::uint32_t chunk = static_cast<std::uint32_t>(8 * d.element_bytes * (1 + rng() % 600));
    const std::size_t elements = rng() % (6 * chunk / d.element_bytes + 1);
    const Bytes x = mixed_payload(elements, d, rng());
    for (int workers : {1, 3}) {
      CompressConfig cfg = config(d, chunk, workers);
      cfg.mode = static_cast<SelectionMode>(t % 5);
      const Container c = compress_stream(x, cfg);
      CHECK(c.header.chunk_count == (x.size() + chunk - 1) / chunk);
      CHECK(decompress_stream(c, workers) == x);
      CHECK(decompress_stream(Container::parse(c.serialize())) == x);
    }
  }
}

TEST_CASE("parallel output matches the serial reference byte for byte") {
  std::mt19937_64 rng(67);
  for (int t = 0; t < 24; ++t) {
    const DType d = kAll[t % 4];
    const Bytes x = mixed_payload(20000 + rng() % 50000, d, rng());
    CompressConfig cfg = config(d, 1024 * d.element_bytes);
    cfg.mode = static_cast<SelectionMode>(t % 5);
    cfg.skip_window = static_cast<std::uint32_t>(t % 4);
    const Bytes ref = reference::compress_stream_serial(x, cfg).serialize();
    for (int workers : {1, 2, 8}) {
      cfg.worker_count = workers;
      CHECK(compress_stream(x, cfg).serialize() == ref);
    }
    CHECK(reference::decompress_stream_serial(Container::parse(ref)) == x);
  }
}

TEST_CASE("empty input") {
  const Container c = compress_stream({}, config(DType::bf16()));
  CHECK(c.header.chunk_count == 0);
  CHECK(c.encoded_size() == kFixedHeaderSize + kChecksumSize);
  CHECK(decompress_stream(c).empty());
}

TEST_CASE("misaligned input is rejected for float dtypes only") {
  const Bytes x(1001, 1);
  try {
    compress_stream(x, config(DType::bf16()));
    FAIL("expected MISALIGNED_INPUT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MisalignedInput);
  }
  const Container c = compress_stream(x, config(DType::opaque()));
  CHECK(decompress_stream(c) == x);
}

TEST_CASE("group sizes per chunk") {
  const Bytes x = testing::gaussian_weights(262144, DType::bf16(), 0.02, 3);
  const Container c = compress_stream(x, config(DType::bf16(), kDefaultChunkSize));
  CHECK(c.header.group_length(0) == 131072);
  const Bytes y = testing::gaussian_weights(65536, DType::fp32(), 0.02, 3);
  const Container c32 = compress_stream(y, config(DType::fp32(), kDefaultChunkSize));
  CHECK(c32.header.group_length(0) == 65536);
}

TEST_CASE("random opaque data pays only the framing overhead") {
  const Bytes x = testing::random_bytes(4 << 20, 71);
  const Container c = compress_stream(x, config(DType::opaque(), kDefaultChunkSize));
  for (const auto& r : c.table) CHECK(r.method == Method::Stored);
  // header + 5 bytes per chunk-group + checksum
  CHECK(c.encoded_size() == x.size() + kFixedHeaderSize + 16 * kRecordSize + kChecksumSize);
}

TEST_CASE("fraction groups of noise are skipped after a failed probe") {
  const Bytes x = testing::gaussian_weights(40 * 2048, DType::bf16(), 0.02, 73);
  CompressConfig cfg = config(DType::bf16(), 4096);
  const Container c = compress_stream(x, cfg);
  for (std::uint64_t k = 0; k < c.header.chunk_count; ++k) {
    CHECK(c.record(k, 0).method == Method::Huffman);
    CHECK(c.record(k, 1).method == Method::Stored);
  }
}

TEST_CASE("corruption is detected") {
  const Bytes x = testing::gaussian_weights(30000, DType::bf16(), 0.02, 79);
  const Container c = compress_stream(x, config(DType::bf16()));
  REQUIRE(c.checksum_ok());
  Container bad = c;
  bad.payload[bad.payload.size() / 2] ^= 0x10;
  CHECK_FALSE(bad.checksum_ok());
  try {
    decompress_stream(bad);
    FAIL("expected CHECKSUM_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ChecksumMismatch);
  }
}

TEST_CASE("single chunk decode") {
  const DType d = DType::fp16();
  const Bytes x = mixed_payload(50000, d, 83);
  const Container c = compress_stream(x, config(d, 2048));
  for (std::uint64_t k = 0; k < c.header.chunk_count; ++k) {
    const Bytes part = decompress_chunk(c, k);
    const auto begin = x.begin() + static_cast<std::ptrdiff_t>(k * 2048);
    CHECK(part == Bytes(begin, begin + static_cast<std::ptrdiff_t>(part.size())));
  }
  CHECK_THROWS_AS(decompress_chunk(c, c.header.chunk_count), Error);
}

TEST_CASE("streaming compress and decompress") {
  std::mt19937_64 rng(89);
  for (int t = 0; t < 12; ++t) {
    const DType d = kAll[t % 4];
    const Bytes x = mixed_payload(rng() % 300000, d, rng());
    CompressConfig cfg = config(d, 2048 * d.element_bytes, 1 + t % 3);
    cfg.mode = static_cast<SelectionMode>(t % 5);
    ContainerOptions opts;
    opts.safetensors = t % 2 == 0;

    std::stringstream ss;
    const auto res = compress_to(
        [&](std::uint64_t off, MutableByteView dst) {
          std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
        },
        x.size(), ss, cfg, opts);
    const std::string s = ss.str();
    const Bytes bytes(s.begin(), s.end());
    CHECK(res.encoded_size == bytes.size());
    // same bytes as the in-memory path
    CHECK(bytes == compress_stream(x, cfg, opts).serialize());

    std::stringstream in(s);
    Bytes back;
    const auto h = decompress_from(in, [&](ByteView v) { back.insert(back.end(), v.begin(), v.end()); });
    CHECK(back == x);
    CHECK(h.safetensors == opts.safetensors);
  }
}

TEST_CASE("streaming decompress reports a bad checksum") {
  const Bytes x = testing::gaussian_weights(50000, DType::bf16(), 0.02, 97);
  Bytes bytes = compress_stream(x, config(DType::bf16())).serialize();
  bytes[bytes.size() - 10] ^= 1;
  std::stringstream in(std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(decompress_from(in, [](ByteView) {}), Error);
}

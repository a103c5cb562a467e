#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "znn/entropy.hpp"
#include "znn/error.hpp"

using namespace znn;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

// Bytes with a given fraction of zeros scattered at random, the rest drawn
// from a skewed nonzero alphabet.
Bytes zero_mix(std::size_t n, double zero_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::geometric_distribution<int> g(0.2);
  Bytes out(n);
  for (auto& b : out) b = u(rng) < zero_fraction ? 0 : static_cast<std::uint8_t>(1 + g(rng) % 255);
  return out;
}

// Exactly half zeros, with zero runs capped at `max_run`, optionally one
// extra contiguous zero block at the front.
Bytes half_zero(std::size_t n, std::size_t max_run, std::size_t block, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bytes out(n, 0);
  std::size_t i = block;
  std::size_t run = 0;
  for (; i < n; ++i) {
    const bool zero = run < max_run && (rng() & 1);
    if (zero) {
      ++run;
    } else {
      out[i] = static_cast<std::uint8_t>(1 + rng() % 255);
      run = 0;
    }
  }
  return out;
}

double zero_fraction(const Bytes& b) {
  return static_cast<double>(std::count(b.begin(), b.end(), 0)) / static_cast<double>(b.size());
}

std::size_t longest_zero_run(const Bytes& b) {
  std::size_t best = 0, cur = 0;
  for (auto v : b) {
    cur = v == 0 ? cur + 1 : 0;
    best = std::max(best, cur);
  }
  return best;
}

}  // namespace

TEST_CASE("huffman on a single repeated symbol uses 1-bit codes") {
  const Bytes x(65536, 0x7F);
  const auto enc = huffman_compress(x);
  CHECK(enc.method == Method::Huffman);
  // bit-count oracle: 128 table bytes + one bit per symbol
  CHECK(enc.payload.size() == 128 + 65536 / 8);
  CHECK(enc.payload.size() == 8320);
  CHECK(huffman_decompress(enc.payload, x.size()) == x);
}

TEST_CASE("all-zero input is zero-truncated") {
  const Bytes x(65536, 0);
  const auto h = huffman_compress(x);
  CHECK(h.method == Method::ZeroTruncated);
  CHECK(h.payload.empty());
  const auto lz = lz_entropy_compress(x);
  CHECK(lz.method == Method::ZeroTruncated);
  CHECK(lz.payload.size() <= 64);
  for (const Method m : {Method::Huffman, Method::LzEntropy}) CHECK(encode_group(x, m).method == Method::ZeroTruncated);
  CHECK(encode_group(x, Method::Stored).method == Method::Stored);
}

TEST_CASE("random bytes are stored") {
  const Bytes x = testing::random_bytes(65536, 3);
  CHECK(testing::entropy_oracle(x) >= 7.99);
  const auto enc = huffman_compress(x);
  CHECK(enc.method == Method::Stored);
  CHECK(enc.payload == x);
  CHECK(lz_entropy_compress(x).method == Method::Stored);
}

TEST_CASE("huffman code lengths") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    Histogram h{};
    const int used = 1 + static_cast<int>(rng() % 256);
    for (int s = 0; s < used; ++s) {
      // mix of flat and very skewed distributions
      const std::uint64_t c = (t % 3 == 0) ? (1ull << (rng() % 30)) : 1 + rng() % 1000;
      h[(s * 37 + t) % 256] += c;
    }
    const auto table = HuffmanTable::build(h);
    unsigned max_len = 0;
    for (int s = 0; s < 256; ++s) {
      CHECK((table.lengths[s] == 0) == (h[s] == 0));
      max_len = std::max<unsigned>(max_len, table.lengths[s]);
    }
    CHECK(max_len <= kMaxCodeLength);
    CHECK(table.kraft_sum() <= 4096);
    // complete code when more than one symbol
    if (used > 1) CHECK(table.kraft_sum() == 4096);

    // prefix-free canonical codes
    const auto codes = table.canonical_codes();
    for (int a = 0; a < 256; ++a) {
      if (!table.lengths[a]) continue;
      for (int b = 0; b < 256; ++b) {
        if (a == b || !table.lengths[b] || table.lengths[b] < table.lengths[a]) continue;
        const unsigned shift = table.lengths[b] - table.lengths[a];
        CHECK((codes[b] >> shift) != codes[a]);
      }
    }
  }
}

TEST_CASE("length-limited code matches the textbook optimum when it fits") {
  std::mt19937_64 rng(23);
  int compared = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1000 + rng() % 50000;
    Bytes x(n);
    std::geometric_distribution<int> g(0.2 + 0.5 * (t % 10) / 10.0);
    for (auto& b : x) b = static_cast<std::uint8_t>(g(rng));
    unsigned depth = 0;
    const std::uint64_t oracle = testing::huffman_cost_oracle(x, &depth);
    const Histogram h = byte_histogram(x);
    const std::uint64_t ours = HuffmanTable::build(h).cost_bits(h);
    if (depth <= kMaxCodeLength) {
      CHECK(ours == oracle);
      ++compared;
    } else {
      CHECK(ours >= oracle);
    }
  }
  CHECK(compared >= 30);
}

TEST_CASE("huffman payload stays inside the entropy bounds") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 4096 + rng() % 200000;
    Bytes x(n);
    std::normal_distribution<double> nd(128.0, 1.0 + (t % 7) * 4.0);
    for (auto& b : x) b = static_cast<std::uint8_t>(std::clamp(nd(rng), 0.0, 255.0));
    const auto enc = huffman_compress(x);
    if (enc.method != Method::Huffman) continue;
    const double H = testing::entropy_oracle(x);
    const double bits = 8.0 * static_cast<double>(enc.payload.size() - kHuffmanTableBytes);
    CHECK(bits >= static_cast<double>(n) * H - 1e-6);
    CHECK(bits <= static_cast<double>(n) * (H + 1.0) + 8.0);  // up to 7 padding bits
    CHECK(enc.payload.size() == huffman_encoded_size(byte_histogram(x)));
    CHECK(huffman_decompress(enc.payload, n) == x);
  }
}

TEST_CASE("huffman encoding is deterministic") {
  const Bytes x = zero_mix(100000, 0.3, 4);
  CHECK(huffman_compress(x).payload == huffman_compress(x).payload);
  CHECK(lz_entropy_compress(x).payload == lz_entropy_compress(x).payload);
}

TEST_CASE("huffman round trips on awkward inputs") {
  std::mt19937_64 rng(31);
  for (std::size_t n : {1u, 2u, 3u, 7u, 8u, 9u, 63u, 64u, 65u, 1000u, 4097u}) {
    for (int t = 0; t < 5; ++t) {
      Bytes x(n);
      for (auto& b : x) b = static_cast<std::uint8_t>(rng() % (1 + t * 60));
      const auto enc = encode_group(x, Method::Huffman);
      Bytes out(n);
      decode_group(enc.method, enc.payload, out);
      CHECK(out == x);
    }
  }
}

TEST_CASE("huffman decoder rejects damaged payloads") {
  Bytes x(10000);
  std::mt19937_64 rng(37);
  std::geometric_distribution<int> g(0.3);
  for (auto& b : x) b = static_cast<std::uint8_t>(g(rng));
  const auto enc = huffman_compress(x);
  REQUIRE(enc.method == Method::Huffman);

  SUBCASE("kraft sum above one") {
    Bytes bad = enc.payload;
    for (std::size_t i = 0; i < kHuffmanTableBytes; ++i) bad[i] = 0x11;  // 256 one-bit codes
    CHECK(code_of([&] { huffman_decompress(bad, x.size()); }) == ErrorCode::CorruptTable);
  }
  SUBCASE("table cut off") {
    const Bytes bad(enc.payload.begin(), enc.payload.begin() + 60);
    CHECK(code_of([&] { huffman_decompress(bad, x.size()); }) == ErrorCode::TruncatedPayload);
  }
  SUBCASE("payload cut short") {
    const Bytes bad(enc.payload.begin(), enc.payload.end() - 10);
    CHECK(code_of([&] { huffman_decompress(bad, x.size()); }) == ErrorCode::TruncatedPayload);
  }
  SUBCASE("extra bytes") {
    Bytes bad = enc.payload;
    bad.push_back(0xAA);
    CHECK(code_of([&] { huffman_decompress(bad, x.size()); }) == ErrorCode::ExcessBits);
  }
}

TEST_CASE("lz backend beats huffman on mostly-zero chunks") {
  const Bytes x = zero_mix(256 * 1024, 0.95, 41);
  const auto lz = lz_entropy_compress(x);
  const auto h = huffman_compress(x);
  CHECK(lz.method == Method::LzEntropy);
  CHECK(lz.payload.size() < h.payload.size());
  CHECK(lz_entropy_decompress(lz.payload, x.size()) == x);

  Bytes bad = lz.payload;
  bad.resize(bad.size() / 2);
  Bytes out(x.size());
  CHECK_THROWS_AS(lz_entropy_decompress_into(bad, out), Error);
}

TEST_CASE("auto selection thresholds") {
  const std::size_t n = 256 * 1024;
  SUBCASE("95% zeros") {
    const Bytes x = zero_mix(n, 0.95, 43);
    CHECK(zero_fraction(x) > 0.90);
    CHECK(select_method(x, SelectionMode::DeltaAuto) == Method::LzEntropy);
  }
  SUBCASE("50% zeros, short runs") {
    const Bytes x = half_zero(n, 1024, 0, 47);
    CHECK(zero_fraction(x) < 0.6);
    CHECK(longest_zero_run(x) <= 1024);
    CHECK(select_method(x, SelectionMode::DeltaAuto) == Method::Huffman);
  }
  SUBCASE("50% zeros, one 8KB run") {
    const Bytes x = half_zero(n, 64, 8192, 53);
    CHECK(zero_fraction(x) < 0.6);
    CHECK(longest_zero_run(x) >= 8192);
    CHECK(select_method(x, SelectionMode::DeltaAuto) == Method::LzEntropy);
  }
  SUBCASE("forced and model modes") {
    const Bytes x = zero_mix(n, 0.95, 59);
    CHECK(select_method(x, SelectionMode::Model) == Method::Huffman);
    CHECK(select_method(x, SelectionMode::ForceHuffman) == Method::Huffman);
    CHECK(select_method(x, SelectionMode::ForceLz) == Method::LzEntropy);
    CHECK(select_method(x, SelectionMode::ForceStored) == Method::Stored);
  }
}

#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "znn/delta.hpp"
#include "znn/error.hpp"

using namespace znn;

namespace {

CompressConfig bf16_config() {
  CompressConfig cfg;
  cfg.dtype = DType::bf16();
  cfg.chunk_size = 65536;
  return cfg;
}

}  // namespace

TEST_CASE("xor identities") {
  const Bytes x = testing::random_bytes(10000, 1);
  const Bytes y = testing::random_bytes(10000, 2);
  CHECK(xor_bytes(x, x) == Bytes(x.size(), 0));
  CHECK(xor_bytes(x, Bytes(x.size(), 0)) == x);
  CHECK(xor_bytes(xor_bytes(x, y), y) == x);
  CHECK(xor_bytes(x, y) == reference::xor_bytes_serial(x, y));

  const Bytes big_a = testing::random_bytes(9 << 20, 3), big_b = testing::random_bytes(9 << 20, 4);
  CHECK(xor_bytes(big_a, big_b) == reference::xor_bytes_serial(big_a, big_b));

  Bytes z = x;
  xor_into(z, y);
  CHECK(z == xor_bytes(x, y));
  CHECK_THROWS_AS(xor_bytes(x, Bytes(3)), Error);
}

TEST_CASE("identical checkpoints give an almost empty delta") {
  const Bytes base = testing::gaussian_weights(1 << 20, DType::bf16(), 0.02, 5);
  const Container d = compress_delta(base, base, bf16_config());
  CHECK(d.header.delta);
  CHECK(d.header.base_digest == sha256(base));
  for (const auto& r : d.table) CHECK(r.method == Method::ZeroTruncated);
  CHECK(static_cast<double>(d.encoded_size()) < 0.01 * static_cast<double>(base.size()));
  CHECK(apply_delta(base, d) == base);
}

TEST_CASE("30% perturbed target compresses better as a delta") {
  const Bytes base = testing::gaussian_weights(1 << 20, DType::bf16(), 0.02, 7);
  const Bytes target = testing::perturb_bytes(base, 0.30, 8);
  std::size_t same = 0;
  for (std::size_t i = 0; i < base.size(); ++i) same += base[i] == target[i];
  CHECK(static_cast<double>(same) / static_cast<double>(base.size()) == doctest::Approx(0.70).epsilon(0.01));

  const Container d = compress_delta(base, target, bf16_config());
  const Container standalone = compress_stream(target, bf16_config());
  CHECK(d.encoded_size() < standalone.encoded_size());
  CHECK(apply_delta(base, d) == target);
}

TEST_CASE("changes in low fraction bits leave the exponent delta empty") {
  const Bytes base = testing::gaussian_weights(1 << 19, DType::bf16(), 0.02, 9);
  Bytes target = base;
  std::mt19937_64 rng(10);
  // flip bits 0..3 of the fraction (low byte of each BF16 element)
  for (std::size_t i = 0; i < target.size(); i += 2) target[i] ^= static_cast<std::uint8_t>(rng() & 0x0F);
  const Container d = compress_delta(base, target, bf16_config());
  for (std::uint64_t k = 0; k < d.header.chunk_count; ++k) {
    CHECK(d.record(k, 0).method == Method::ZeroTruncated);
    CHECK(d.record(k, 1).method != Method::ZeroTruncated);
  }
  CHECK(apply_delta(base, d) == target);
}

TEST_CASE("delta applied to the wrong base") {
  const Bytes base = testing::gaussian_weights(4096, DType::bf16(), 0.02, 11);
  const Bytes target = testing::perturb(base, DType::bf16(), 0.1, 1, 12);
  const Container d = compress_delta(base, target, bf16_config());
  Bytes other = base;
  other[100] ^= 1;
  try {
    apply_delta(other, d);
    FAIL("expected BASE_DIGEST_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BaseDigestMismatch);
  }
  Container plain = compress_stream(target, bf16_config());
  CHECK_THROWS_AS(apply_delta(base, plain), Error);
}

TEST_CASE("base schedules") {
  SUBCASE("chain, period 10") {
    const auto s = plan_bases(20, 10, ScheduleMode::Chain);
    REQUIRE(s.entries.size() == 20);
    for (const auto& e : s.entries) {
      CHECK(e.index < 20);
      CHECK(e.full == (e.index == 0 || e.index == 10));
      if (!e.full) CHECK(e.base == e.index - 1);
    }
    CHECK(s.longest_chain() <= 9);
    CHECK(s.recovery_path(19) == std::vector<std::uint64_t>{10, 11, 12, 13, 14, 15, 16, 17, 18, 19});
    CHECK(s.recovery_path(0) == std::vector<std::uint64_t>{0});
  }
  SUBCASE("fixed base, period 10") {
    const auto s = plan_bases(20, 10, ScheduleMode::FixedBase);
    std::uint64_t max_distance = 0;
    for (const auto& e : s.entries) {
      if (e.full) continue;
      CHECK((e.base == 0 || e.base == 10));
      max_distance = std::max(max_distance, e.index - e.base);
    }
    CHECK(max_distance == 9);
    CHECK(s.recovery_path(19) == std::vector<std::uint64_t>{10, 19});
  }
  SUBCASE("single checkpoint") {
    const auto s = plan_bases(1, 10, ScheduleMode::Chain);
    REQUIRE(s.entries.size() == 1);
    CHECK(s.entries[0].full);
  }
  SUBCASE("invalid period") {
    try {
      plan_bases(5, 0, ScheduleMode::Chain);
      FAIL("expected INVALID_PERIOD");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidPeriod);
    }
  }
  SUBCASE("json round trip") {
    for (auto mode : {ScheduleMode::Chain, ScheduleMode::FixedBase}) {
      const auto s = plan_bases(13, 4, mode);
      const auto back = BaseSchedule::from_json(s.to_json());
      CHECK(back.entries == s.entries);
      CHECK(back.period == s.period);
      CHECK(back.mode == s.mode);
    }
  }
}

TEST_CASE("checkpoints rebuild through their recovery path") {
  std::vector<Bytes> ckpt{testing::gaussian_weights(8192, DType::bf16(), 0.02, 13)};
  for (int i = 1; i < 12; ++i) ckpt.push_back(testing::perturb(ckpt.back(), DType::bf16(), 0.2, 1, 100 + i));

  for (auto mode : {ScheduleMode::Chain, ScheduleMode::FixedBase}) {
    const auto plan = plan_bases(ckpt.size(), 5, mode);
    std::vector<Container> stored;
    for (const auto& e : plan.entries)
      stored.push_back(e.full ? compress_stream(ckpt[e.index], bf16_config())
                              : compress_delta(ckpt[e.base], ckpt[e.index], bf16_config()));
    for (std::uint64_t i = 0; i < ckpt.size(); ++i) {
      const auto path = plan.recovery_path(i);
      Bytes cur = decompress_stream(stored[path.front()]);
      for (std::size_t k = 1; k < path.size(); ++k) cur = apply_delta(cur, stored[path[k]]);
      CHECK(cur == ckpt[i]);
    }
  }
}

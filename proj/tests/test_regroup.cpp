#include <doctest.h>

#include <bit>
#include <random>

#include "fixtures.hpp"
#include "znn/error.hpp"
#include "znn/regroup.hpp"

using namespace znn;

namespace {

Bytes le16(std::uint16_t v) { return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)}; }
Bytes le32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 24)};
}

const DType kAll[] = {DType::opaque(), DType::fp32(), DType::bf16(), DType::fp16()};

}  // namespace

TEST_CASE("regroup of single values") {
  SUBCASE("bf16 1.0") {
    const auto g = regroup(le16(0x3F80), DType::bf16());
    CHECK(g.groups[0] == Bytes{0x7F});
    CHECK(g.groups[1] == Bytes{0x00});
  }
  SUBCASE("bf16 -1.0 keeps the sign in the low group") {
    const auto g = regroup(le16(0xBF80), DType::bf16());
    CHECK(g.groups[0] == Bytes{0x7F});
    CHECK(g.groups[1] == Bytes{0x01});
  }
  SUBCASE("fp32 1.0") {
    const auto g = regroup(le32(0x3F800000), DType::fp32());
    CHECK(g.groups.size() == 4);
    CHECK(g.groups[0] == Bytes{0x7F});
    CHECK(g.groups[1] == Bytes{0x00});
    CHECK(g.groups[2] == Bytes{0x00});
    CHECK(g.groups[3] == Bytes{0x00});
  }
  SUBCASE("fp32 -1.5: sign joins the top fraction byte, low bytes untouched") {
    // 0xBFC00000: s=1, exponent 0x7F, fraction top bit set.
    const auto g = regroup(le32(0xBFC0ABCD), DType::fp32());
    CHECK(g.groups[0] == Bytes{0x7F});
    CHECK(g.groups[1] == Bytes{0x81});
    CHECK(g.groups[2] == Bytes{0xAB});
    CHECK(g.groups[3] == Bytes{0xCD});
  }
  SUBCASE("opaque is a copy") {
    const Bytes x = {1, 2, 3, 250};
    const auto g = regroup(x, DType::opaque());
    REQUIRE(g.groups.size() == 1);
    CHECK(g.groups[0] == x);
    CHECK(ungroup(g) == x);
  }
}

TEST_CASE("1MB of random fp32 round trips") {
  const Bytes x = testing::random_bytes(1 << 20, 11);
  CHECK(ungroup(regroup(x, DType::fp32())) == x);
}

TEST_CASE("regroup is bijective and bit-preserving for every dtype") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 60; ++t) {
    const DType d = kAll[t % 4];
    const std::size_t n = (rng() % 5000) * d.element_bytes;
    const Bytes x = testing::random_bytes(n, rng());
    const auto g = regroup(x, d);
    for (const auto& grp : g.groups) CHECK(grp.size() == n / d.element_bytes);
    CHECK(ungroup(g) == x);

    // bits are moved, never created or dropped
    std::size_t in_bits = 0, out_bits = 0;
    for (auto b : x) in_bits += std::popcount(b);
    for (const auto& grp : g.groups)
      for (auto b : grp) out_bits += std::popcount(b);
    CHECK(in_bits == out_bits);
    if (d.code == DTypeCode::Opaque) CHECK(g.groups[0] == x);

    // ungroup∘regroup on arbitrary group contents
    GroupedChunk arbitrary{d, n / d.element_bytes, {}};
    for (std::size_t k = 0; k < d.group_count; ++k) arbitrary.groups.push_back(testing::random_bytes(n / d.element_bytes, rng()));
    CHECK(regroup(ungroup(arbitrary), d).groups == arbitrary.groups);
  }
}

TEST_CASE("group 0 is the exponent field") {
  const Bytes f32 = testing::random_bytes(4 * 4096, 21);
  const auto g32 = regroup(f32, DType::fp32());
  for (std::size_t i = 0; i < 4096; ++i) {
    const std::uint32_t v = get_le<std::uint32_t>(&f32[4 * i]);
    CHECK(g32.groups[0][i] == ((v >> 23) & 0xFF));
  }
  const Bytes b16 = testing::random_bytes(2 * 4096, 22);
  const auto gb = regroup(b16, DType::bf16());
  for (std::size_t i = 0; i < 4096; ++i) {
    const std::uint16_t v = get_le<std::uint16_t>(&b16[2 * i]);
    CHECK(gb.groups[0][i] == ((v >> 7) & 0xFF));
  }
  // fp16: five exponent bits on top of group 0
  const Bytes h16 = testing::random_bytes(2 * 4096, 23);
  const auto gh = regroup(h16, DType::fp16());
  for (std::size_t i = 0; i < 4096; ++i) {
    const std::uint16_t v = get_le<std::uint16_t>(&h16[2 * i]);
    CHECK((gh.groups[0][i] >> 3) == ((v >> 10) & 0x1F));
  }
}

TEST_CASE("fast kernels match the element-at-a-time reference") {
  for (const DType d : kAll) {
    const std::size_t n = 3001;
    const Bytes x = testing::random_bytes(n * d.element_bytes, 99 + d.element_bytes);
    std::vector<Bytes> fast(d.group_count, Bytes(n)), ref(d.group_count, Bytes(n));
    std::vector<MutableByteView> fv(fast.begin(), fast.end()), rv(ref.begin(), ref.end());
    regroup_into(x, d, fv);
    reference::regroup_into(x, d, rv);
    CHECK(fast == ref);

    std::vector<ByteView> views(fast.begin(), fast.end());
    Bytes a(x.size()), b(x.size());
    ungroup_into(views, d, a);
    reference::ungroup_into(views, d, b);
    CHECK(a == x);
    CHECK(b == x);
  }
}

TEST_CASE("regroup errors") {
  const Bytes odd(3);
  CHECK_THROWS_AS(regroup(odd, DType::bf16()), Error);
  try {
    regroup(odd, DType::bf16());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MisalignedInput);
  }
  GroupedChunk bad{DType::bf16(), 2, {Bytes(2), Bytes(3)}};
  try {
    ungroup(bad);
    FAIL("expected LENGTH_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
}

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "json.hpp"
#include "znn/analysis.hpp"
#include "znn/error.hpp"

using namespace znn;

TEST_CASE("exponent histogram") {
  Bytes ones;
  for (int i = 0; i < 1000; ++i) ones.insert(ones.end(), {0x80, 0x3F});
  const auto h = exponent_histogram(ones, DType::bf16());
  CHECK(h[127] == 1000);
  std::uint64_t total = 0;
  for (auto c : h) total += c;
  CHECK(total == 1000);

  const auto z = exponent_histogram(Bytes(4000, 0), DType::fp32());
  CHECK(z[0] == 1000);

  // fp16 exponents stay below 32
  const Bytes r = testing::random_bytes(20000, 1);
  const auto f = exponent_histogram(r, DType::fp16());
  for (int v = 32; v < 256; ++v) CHECK(f[v] == 0);

  CHECK_THROWS_AS(exponent_histogram(ones, DType::opaque()), Error);
  CHECK_THROWS_AS(exponent_histogram(Bytes(3), DType::bf16()), Error);
}

TEST_CASE("gaussian weights use few exponent values") {
  const Bytes w = testing::gaussian_weights(1 << 20, DType::bf16(), 0.02, 2);
  auto h = exponent_histogram(w, DType::bf16());
  int nonzero = 0;
  for (auto c : h) nonzero += c > 0;
  CHECK(nonzero < 64);
  std::sort(h.begin(), h.end(), std::greater<>());
  std::uint64_t top = 0, all = 0;
  for (int i = 0; i < 256; ++i) {
    all += h[i];
    if (i < 12) top += h[i];
  }
  CHECK(static_cast<double>(top) / static_cast<double>(all) >= 0.99);
}

TEST_CASE("zero stats") {
  const auto a = zero_stats(Bytes(100, 0));
  CHECK(a.zero_fraction == 1.0);
  CHECK(a.longest_zero_run == 100);
  const auto b = zero_stats(Bytes(100, 7));
  CHECK(b.zero_fraction == 0.0);
  CHECK(b.longest_zero_run == 0);
  const auto c = zero_stats(Bytes{0, 0, 5, 0});
  CHECK(c.zero_fraction == 0.75);
  CHECK(c.longest_zero_run == 2);
  CHECK_THROWS_AS(zero_stats({}), Error);
  CHECK_THROWS_AS(entropy_bits_per_byte({}), Error);
}

TEST_CASE("entropy") {
  CHECK(entropy_bits_per_byte(Bytes(50, 9)) == 0.0);
  CHECK(entropy_bits_per_byte(Bytes{1, 2, 1, 2}) == doctest::Approx(1.0));
  Bytes all(256 * 4);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint8_t>(i);
  CHECK(entropy_bits_per_byte(all) == doctest::Approx(8.0));
  const Bytes r = testing::random_bytes(100000, 3);
  CHECK(entropy_bits_per_byte(r) == doctest::Approx(testing::entropy_oracle(r)).epsilon(1e-12));
}

TEST_CASE("model report") {
  const Bytes zeros(1 << 18, 0);
  const Bytes noise = testing::random_bytes(1 << 18, 4);
  const Bytes clean = testing::clean_fp32_weights(1 << 18, 0.02, 5);
  const TensorInput inputs[] = {
      {"zeros", DType::bf16(), zeros}, {"noise", DType::opaque(), noise}, {"clean", DType::fp32(), clean}};
  CompressConfig cfg;
  const ModelReport rep = model_report(inputs, cfg);
  REQUIRE(rep.tensors.size() == 3);

  CHECK(rep.tensors[0].compressed_pct < 0.1);
  CHECK(rep.tensors[0].groups_pct == std::vector<double>{0.0, 0.0});
  CHECK(rep.tensors[1].compressed_pct == doctest::Approx(100.0).epsilon(0.002));

  const auto& c = rep.tensors[2];
  REQUIRE(c.groups_pct.size() == 4);
  CHECK(c.groups_pct[0] < 60.0);
  CHECK(c.groups_pct[1] > 99.0);
  CHECK(c.groups_pct[2] == 0.0);
  CHECK(c.groups_pct[3] == 0.0);
  CHECK(c.compressed_pct <= 36.0);

  // per-group stored bytes add up to the tensor total within framing overhead
  for (const auto& t : rep.tensors) {
    std::uint64_t sum = 0;
    for (auto s : t.group_stored_bytes) sum += s;
    double overall = 0;
    for (std::size_t g = 0; g < t.groups_pct.size(); ++g) overall += t.groups_pct[g] / t.groups_pct.size();
    CHECK(std::abs(overall - t.compressed_pct) < 0.5);
    CHECK(sum <= t.compressed_bytes);
  }

  std::uint64_t raw = 0, comp = 0;
  for (const auto& t : rep.tensors) {
    raw += t.raw_bytes;
    comp += t.compressed_bytes;
  }
  CHECK(rep.raw_bytes == raw);
  CHECK(rep.compressed_bytes == comp);

  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["tensors"].size() == 3);
  CHECK(j["tensors"][2]["groups_pct"].size() == 4);
  CHECK(j["total_pct"].get<double>() == doctest::Approx(rep.total_pct));
  CHECK(rep.to_table().find("clean") != std::string::npos);
}

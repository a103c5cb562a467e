// Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if anything failed.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "znn/analysis.hpp"
#include "znn/delta.hpp"
#include "znn/pipeline.hpp"
#include "znn/safetensors.hpp"

using namespace znn;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kMB = 1 << 20;

int failures = 0;

void report(int id, const char* status, const std::string& what, const std::string& detail) {
  std::printf("%-4s criterion %2d: %s (%s)\n", status, id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  report(id, ok ? "PASS" : "FAIL", what, detail);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double pct(std::uint64_t part, std::uint64_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

CompressConfig config(DType d, int workers = 0) {
  CompressConfig cfg;
  cfg.dtype = d;
  cfg.worker_count = workers;
  return cfg;
}

// Test-side split of elements into byte groups: top half-word rotated left
// by one, then most significant byte first.
std::vector<Bytes> oracle_groups(ByteView data, DType d) {
  const std::size_t n = data.size() / d.element_bytes;
  std::vector<Bytes> g(d.group_count, Bytes(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (d.element_bytes == 1) {
      g[0][i] = data[i];
      continue;
    }
    const std::uint8_t* e = &data[i * d.element_bytes];
    const unsigned hi = e[d.element_bytes - 1], lo = e[d.element_bytes - 2];
    const unsigned half = (hi << 8) | lo;
    const unsigned rot = ((half << 1) | (half >> 15)) & 0xFFFF;
    g[0][i] = static_cast<std::uint8_t>(rot >> 8);
    g[1][i] = static_cast<std::uint8_t>(rot);
    for (std::size_t k = 2; k < d.group_count; ++k) g[k][i] = e[d.element_bytes - 1 - k];
  }
  return g;
}

struct GroupTotals {
  std::vector<std::uint64_t> raw, stored;
};

GroupTotals group_totals(const Container& c) {
  const std::size_t gc = c.header.dtype.group_count;
  GroupTotals t{std::vector<std::uint64_t>(gc, 0), std::vector<std::uint64_t>(gc, 0)};
  for (std::uint64_t k = 0; k < c.header.chunk_count; ++k)
    for (std::size_t g = 0; g < gc; ++g) {
      t.raw[g] += c.header.group_length(k);
      t.stored[g] += c.record(k, g).stored_len;
    }
  return t;
}

// Checks every HUFFMAN group of `c` against the entropy of the matching
// input bytes. Returns the number of groups checked; bumps `violations`.
std::size_t check_entropy_bounds(const Container& c, ByteView input, std::size_t& violations, double& worst_slack) {
  const DType d = c.header.dtype;
  const PayloadOffsets offs = compute_payload_offsets(c.table, d.group_count);
  std::size_t checked = 0;
  for (std::uint64_t k = 0; k < c.header.chunk_count; ++k) {
    const std::uint64_t begin = k * c.header.chunk_size;
    const ByteView chunk = input.subspan(begin, c.header.chunk_length(k));
    std::vector<Bytes> groups;
    for (std::size_t g = 0; g < d.group_count; ++g) {
      const auto& r = c.record(k, g);
      if (r.method != Method::Huffman) continue;
      if (groups.empty()) groups = oracle_groups(chunk, d);
      const double raw = static_cast<double>(groups[g].size());
      const double H = testing::entropy_oracle(groups[g]);
      const double total_bits = 8.0 * r.stored_len;
      const double code_bits = total_bits - 8.0 * kHuffmanTableBytes;
      const double upper = raw * (H + 1.0) + 8.0 * kHuffmanTableBytes;
      if (code_bits < raw * H || total_bits > upper) ++violations;
      worst_slack = std::min(worst_slack, (upper - total_bits) / raw);
      (void)offs;
      ++checked;
    }
  }
  return checked;
}

// Fixtures shared by several criteria.
struct Fixtures {
  Bytes bf16;       // 64MB gaussian BF16
  Bytes clean32;    // 64MB FP32 with zero low bytes
  Container bf16_c;
  Container clean32_c;
};

Fixtures& fixtures() {
  static Fixtures f = [] {
    Fixtures x;
    x.bf16 = testing::gaussian_weights(32 * kMB, DType::bf16(), 0.02, 500);
    x.clean32 = testing::clean_fp32_weights(16 * kMB, 0.02, 501);
    x.bf16_c = compress_stream(x.bf16, config(DType::bf16()));
    x.clean32_c = compress_stream(x.clean32, config(DType::fp32()));
    return x;
  }();
  return f;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const DType dtypes[] = {DType::fp32(), DType::bf16(), DType::fp16(), DType::opaque()};
  const std::size_t pool_size = 4 * kMB + 4096;
  // Per dtype: weights, clean weights with zero runs, noise.
  std::vector<std::vector<Bytes>> pools;
  for (int di = 0; di < 4; ++di) {
    const DType d = dtypes[di];
    const DType w = d.is_float() ? d : DType::bf16();
    std::vector<Bytes> p;
    p.push_back(testing::gaussian_weights(pool_size / w.element_bytes, w, 0.02, 600 + di));
    Bytes sparse = testing::gaussian_weights(pool_size / w.element_bytes, w, 0.5, 700 + di);
    std::mt19937_64 rng(800 + di);
    for (std::size_t i = 0; i < sparse.size();) {
      const std::size_t run = std::min<std::size_t>(sparse.size() - i, rng() % 200000);
      if (rng() & 1) std::fill_n(sparse.begin() + static_cast<std::ptrdiff_t>(i), run, 0);
      i += run + 1;
    }
    p.push_back(std::move(sparse));
    p.push_back(testing::random_bytes(pool_size, 900 + di));
    pools.push_back(std::move(p));
  }

  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  int failed = 0, odd_lengths = 0, empty = 0;
  std::uint64_t bytes = 0;
  const int cases = 1000;
  for (int t = 0; t < cases; ++t) {
    const int di = t % 4;
    const DType d = dtypes[di];
    std::size_t len = static_cast<std::size_t>(rng() % (4 * kMB + 1));
    if (t % 10 == 0) len = static_cast<std::size_t>(rng() % 2048);  // small inputs
    if (t % 100 == 4) len = 0;
    if (t % 100 == 8) len = (1 + rng() % 15) * kDefaultChunkSize;
    len -= len % d.element_bytes;
    const Bytes& pool = pools[di][rng() % 3];
    std::size_t off = static_cast<std::size_t>(rng() % (pool.size() - len + 1));
    off -= off % d.element_bytes;
    Bytes x(pool.begin() + static_cast<std::ptrdiff_t>(off), pool.begin() + static_cast<std::ptrdiff_t>(off + len));
    // a few fresh random bytes so no two cases repeat
    for (int k = 0; k < 16 && !x.empty(); ++k) x[rng() % x.size()] = static_cast<std::uint8_t>(rng());

    CompressConfig cfg = config(d, t % 2 == 0 ? 1 : 8);
    cfg.mode = static_cast<SelectionMode>(rng() % 5);
    if (t % 3 == 0) cfg.chunk_size = static_cast<std::uint32_t>(8 * d.element_bytes * (1 + rng() % 8192));
    if (len % cfg.chunk_size != 0) ++odd_lengths;
    if (len == 0) ++empty;
    const Bytes packed = compress_stream(x, cfg).serialize();
    const Bytes back = decompress_stream(Container::parse(packed), cfg.worker_count);
    if (back != x) ++failed;
    bytes += len;
  }
  const double secs = seconds_since(t0);
  verdict(1, failed == 0 && secs < 120.0, "lossless round trip",
          fmt("%d cases, %d failures, %d non-multiple lengths, %d empty, %.1f MB, %.1f s", cases, failed,
              odd_lengths, empty,
              static_cast<double>(bytes) / kMB, secs));
}

void criterion_2() {
  const Bytes zeros(64 * kMB, 0);
  const auto t0 = Clock::now();
  const Container c = compress_stream(zeros, config(DType::bf16()));
  const double secs = seconds_since(t0);
  bool all_zero = true;
  for (const auto& r : c.table) all_zero = all_zero && r.method == Method::ZeroTruncated;
  const bool ok_rt = decompress_stream(c) == zeros;
  const double p = pct(c.encoded_size(), zeros.size());
  verdict(2, p < 1.0 && secs < 1.0 && all_zero && ok_rt, "zero truncation",
          fmt("64MB zeros -> %.4f%%, %llu bytes, %.3f s", p, static_cast<unsigned long long>(c.encoded_size()), secs));
}

void criterion_3() {
  const Bytes noise = testing::random_bytes(64 * kMB, 3);
  const Container c = compress_stream(noise, config(DType::opaque()));
  bool all_stored = true;
  for (const auto& r : c.table) all_stored = all_stored && r.method == Method::Stored;
  // framing oracle: header, 5 bytes per chunk-group, checksum
  const std::uint64_t expected = noise.size() + kFixedHeaderSize + 256 * kRecordSize + kChecksumSize;
  const double p = pct(c.encoded_size(), noise.size());
  verdict(3, p <= 100.2 && all_stored && c.encoded_size() == expected, "never expand",
          fmt("%.4f%%, overhead %llu bytes, all stored: %s", p,
              static_cast<unsigned long long>(c.encoded_size() - noise.size()), all_stored ? "yes" : "no"));
}

void criterion_4() {
  auto& f = fixtures();
  std::size_t checked = 0, violations = 0;
  double slack = 1e9;
  checked += check_entropy_bounds(f.bf16_c, f.bf16, violations, slack);
  checked += check_entropy_bounds(f.clean32_c, f.clean32, violations, slack);
  for (int di = 0; di < 3; ++di) {
    const DType d = di == 0 ? DType::fp16() : di == 1 ? DType::bf16() : DType::fp32();
    const Bytes w = testing::gaussian_weights(4 * kMB / d.element_bytes, d, 0.02 * (di + 1), 40 + di);
    CompressConfig cfg = config(d);
    cfg.mode = SelectionMode::ForceHuffman;
    checked += check_entropy_bounds(compress_stream(w, cfg), w, violations, slack);
  }
  Bytes skewed(8 * kMB);
  std::mt19937_64 rng(44);
  std::geometric_distribution<int> g(0.1);
  for (auto& b : skewed) b = static_cast<std::uint8_t>(g(rng));
  checked += check_entropy_bounds(compress_stream(skewed, config(DType::opaque())), skewed, violations, slack);
  verdict(4, checked > 0 && violations == 0, "entropy bounds on huffman groups",
          fmt("%zu groups checked, %zu violations, min upper slack %.4f bits/byte", checked, violations, slack));
}

void criterion_5() {
  auto& f = fixtures();
  const Container& c = f.bf16_c;
  bool g1_stored = true;
  for (std::uint64_t k = 0; k < c.header.chunk_count; ++k) g1_stored = g1_stored && c.record(k, 1).method == Method::Stored;
  const auto t = group_totals(c);
  const double g0 = pct(t.stored[0], t.raw[0]);
  const double total = pct(c.encoded_size(), f.bf16.size());
  const double predicted = 0.5 * g0 + 50.0;
  const double bound = 100.0 * testing::entropy_oracle(oracle_groups(f.bf16, DType::bf16())[0]) / 8.0;
  const bool ok = g1_stored && std::abs(total - predicted) <= 0.3 && std::abs(g0 - bound) <= 3.0;
  verdict(5, ok, "regular bf16 shape",
          fmt("group 1 stored: %s, g0 %.2f%% (entropy bound %.2f%%), total %.2f%% vs predicted %.2f%%",
              g1_stored ? "yes" : "no", g0, bound, total, predicted));
}

void criterion_6() {
  auto& f = fixtures();
  const Container& c = f.clean32_c;
  const auto t = group_totals(c);
  double g[4];
  for (int k = 0; k < 4; ++k) g[k] = pct(t.stored[k], t.raw[k]);
  const double total = pct(c.encoded_size(), f.clean32.size());
  const bool ok = g[0] < 90.0 && g[1] >= 99.0 && g[2] == 0.0 && g[3] == 0.0 && total <= 36.0;
  verdict(6, ok, "clean fp32 emulation",
          fmt("groups (%.1f%%, %.1f%%, %.1f%%, %.1f%%), total %.2f%%", g[0], g[1], g[2], g[3], total));
}

void criterion_7() {
  const DType d = DType::bf16();
  const Bytes base = testing::gaussian_weights(8 * kMB, d, 0.02, 70);
  const CompressConfig cfg = config(d);

  const Container same = compress_delta(base, base, cfg);
  const double same_pct = pct(same.encoded_size(), base.size());
  const bool a = same_pct < 1.0 && apply_delta(base, same) == base;

  const Bytes perturbed = testing::perturb_bytes(base, 0.30, 71);
  const Container d30 = compress_delta(base, perturbed, cfg);
  const Container standalone = compress_stream(perturbed, cfg);
  const bool b = d30.encoded_size() < standalone.encoded_size() && apply_delta(base, d30) == perturbed;

  // sweep over kinds and amounts of change
  struct Case {
    const char* kind;
    double fraction;
  };
  const Case sweep[] = {{"bytes", 0.01}, {"bytes", 0.05}, {"bytes", 0.10}, {"bytes", 0.30}, {"bytes", 0.60},
                        {"low", 0.05},   {"low", 0.20},   {"low", 0.50},   {"low", 0.90},   {"both", 0.10},
                        {"both", 0.40},  {"both", 0.80}};
  double worst = 0.0;
  std::string worst_case;
  bool c_ok = true;
  std::uint64_t seed = 72;
  for (const auto& s : sweep) {
    const std::string kind = s.kind;
    const Bytes target = kind == "bytes" ? testing::perturb_bytes(base, s.fraction, seed++)
                                         : testing::perturb(base, d, s.fraction, kind == "low" ? 1 : 2, seed++);
    const Bytes x = xor_bytes(base, target);
    std::uint64_t sizes[3];
    const SelectionMode modes[] = {SelectionMode::DeltaAuto, SelectionMode::ForceHuffman, SelectionMode::ForceLz};
    for (int m = 0; m < 3; ++m) {
      CompressConfig mc = cfg;
      mc.mode = modes[m];
      sizes[m] = compress_stream(x, mc).encoded_size();
    }
    const double ratio = static_cast<double>(sizes[0]) / static_cast<double>(std::min(sizes[1], sizes[2]));
    if (ratio > worst) {
      worst = ratio;
      worst_case = fmt("%s %.2f", s.kind, s.fraction);
    }
    c_ok = c_ok && ratio <= 1.02;
  }
  verdict(7, a && b && c_ok, "delta properties",
          fmt("(a) identical %.4f%%; (b) 30%% perturbed delta %.2f%% vs standalone %.2f%%; "
              "(c) auto/best worst ratio %.4f at %s over %zu fixtures",
              same_pct, pct(d30.encoded_size(), base.size()), pct(standalone.encoded_size(), base.size()), worst,
              worst_case.c_str(), std::size(sweep)));
}

void criterion_8() {
  auto& f = fixtures();
  const Bytes shuffled = testing::shuffle_elements(f.bf16, DType::bf16(), 80);
  const double before = pct(f.bf16_c.encoded_size(), f.bf16.size());
  const double after = pct(compress_stream(shuffled, config(DType::bf16())).encoded_size(), shuffled.size());
  verdict(8, std::abs(before - after) < 0.5, "shuffle near-invariance",
          fmt("%.4f%% -> %.4f%%, delta %.4f pp", before, after, std::abs(before - after)));
}

void criterion_9() {
  const char* path = std::getenv("ZNN_REAL_MODEL");
  if (!path || !*path) {
    report(9, "SKIP", "real model check", "set ZNN_REAL_MODEL to a BF16 safetensors file");
    return;
  }
  try {
    const SafetensorsLayout layout = read_safetensors_layout(path);
    std::ifstream in(path, std::ios::binary);
    // BF16 tensor bytes in file order, middle 1GB.
    std::uint64_t bf16_total = 0;
    for (const auto& s : layout.spans)
      if (s.dtype.code == DTypeCode::Bf16) bf16_total += s.end - s.begin;
    const std::uint64_t want = std::min<std::uint64_t>(bf16_total, 1ull << 30);
    const std::uint64_t skip = (bf16_total - want) / 2 / 2 * 2;
    Bytes sample;
    sample.reserve(want);
    std::uint64_t seen = 0;
    for (const auto& s : layout.spans) {
      if (s.dtype.code != DTypeCode::Bf16 || sample.size() >= want) continue;
      const std::uint64_t len = s.end - s.begin;
      std::uint64_t from = seen < skip ? std::min(len, skip - seen) : 0;
      seen += len;
      const std::uint64_t take = std::min(len - from, want - sample.size());
      if (take == 0) continue;
      const std::size_t at = sample.size();
      sample.resize(at + take);
      in.seekg(static_cast<std::streamoff>(layout.data_start + s.begin + from));
      in.read(reinterpret_cast<char*>(sample.data() + at), static_cast<std::streamsize>(take));
      if (!in) throw std::runtime_error("short read");
    }
    const Container c = compress_stream(sample, config(DType::bf16()));
    const auto t = group_totals(c);
    const double total = pct(c.encoded_size(), sample.size());
    const double g0 = pct(t.stored[0], t.raw[0]);
    verdict(9, total >= 63.0 && total <= 70.0 && g0 >= 30.0 && g0 <= 37.0, "real model check",
            fmt("%.1f MB sample, total %.2f%%, exponent group %.2f%%", static_cast<double>(sample.size()) / kMB, total,
                g0));
  } catch (const std::exception& e) {
    verdict(9, false, "real model check", e.what());
  }
}

void criterion_10() {
  auto& f = fixtures();
  const CompressConfig cfg = config(DType::bf16(), 1);
  double best_c = 0, best_d = 0;
  for (int rep = 0; rep < 3; ++rep) {
    auto t0 = Clock::now();
    const Container c = compress_stream(f.bf16, cfg);
    best_c = std::max(best_c, static_cast<double>(f.bf16.size()) / kMB / seconds_since(t0));
    t0 = Clock::now();
    const Bytes back = decompress_stream(c, 1);
    best_d = std::max(best_d, static_cast<double>(back.size()) / kMB / seconds_since(t0));
  }
  std::ofstream("acceptance_throughput.json")
      << fmt("{\"dtype\":\"bf16\",\"threads\":1,\"bytes\":%zu,\"compress_mb_s\":%.1f,\"decompress_mb_s\":%.1f}\n",
             f.bf16.size(), best_c, best_d);
  verdict(10, best_c >= 100.0 && best_d >= 150.0, "single-thread bf16 throughput",
          fmt("compress %.0f MB/s (floor 100), decompress %.0f MB/s (floor 150)", best_c, best_d));
}

}  // namespace

int main(int argc, char** argv) {
  // optional: run a subset, e.g. `znn_acceptance 2 5`
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::function<void()> all[] = {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                       criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};
  for (int id = 1; id <= 10; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    try {
      all[id - 1]();
    } catch (const std::exception& e) {
      verdict(id, false, "exception", e.what());
    }
  }
  std::printf("%s: %d failed\n", failures == 0 ? "OK" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}

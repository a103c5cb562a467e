// Serial reference vs OpenMP kernels.
#include <benchmark/benchmark.h>

#include <omp.h>

#include <cmath>
#include <cstring>
#include <random>

#include "znn/delta.hpp"
#include "znn/pipeline.hpp"
#include "znn/regroup.hpp"

using namespace znn;

namespace {

Bytes bf16_weights(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 0.02f);
  Bytes out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    float f = nd(rng);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    u += 0x7FFF + ((u >> 16) & 1);
    const auto h = static_cast<std::uint16_t>(u >> 16);
    out[2 * i] = static_cast<std::uint8_t>(h);
    out[2 * i + 1] = static_cast<std::uint8_t>(h >> 8);
  }
  return out;
}

const Bytes& data() {
  static const Bytes d = bf16_weights(8u << 20, 1);  // 16 MB
  return d;
}

void BM_RegroupReference(benchmark::State& st) {
  const Bytes& x = data();
  const std::size_t n = x.size() / 2;
  Bytes g0(n), g1(n);
  const MutableByteView views[] = {g0, g1};
  for (auto _ : st) {
    reference::regroup_into(x, DType::bf16(), views);
    benchmark::DoNotOptimize(g0.data());
  }
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * x.size()));
}

void BM_RegroupFast(benchmark::State& st) {
  const Bytes& x = data();
  const std::size_t n = x.size() / 2;
  Bytes g0(n), g1(n);
  const MutableByteView views[] = {g0, g1};
  for (auto _ : st) {
    regroup_into(x, DType::bf16(), views);
    benchmark::DoNotOptimize(g0.data());
  }
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * x.size()));
}

void BM_XorReference(benchmark::State& st) {
  const Bytes& a = data();
  const Bytes b = bf16_weights(a.size() / 2, 2);
  for (auto _ : st) benchmark::DoNotOptimize(reference::xor_bytes_serial(a, b));
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * a.size()));
}

void BM_XorParallel(benchmark::State& st) {
  const Bytes& a = data();
  const Bytes b = bf16_weights(a.size() / 2, 2);
  for (auto _ : st) benchmark::DoNotOptimize(xor_bytes(a, b));
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * a.size()));
}

void BM_CompressSerial(benchmark::State& st) {
  CompressConfig cfg;
  cfg.dtype = DType::bf16();
  for (auto _ : st) benchmark::DoNotOptimize(reference::compress_stream_serial(data(), cfg));
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * data().size()));
}

void BM_CompressParallel(benchmark::State& st) {
  CompressConfig cfg;
  cfg.dtype = DType::bf16();
  cfg.worker_count = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(compress_stream(data(), cfg));
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * data().size()));
}

void BM_DecompressSerial(benchmark::State& st) {
  CompressConfig cfg;
  cfg.dtype = DType::bf16();
  const Container c = compress_stream(data(), cfg);
  for (auto _ : st) benchmark::DoNotOptimize(reference::decompress_stream_serial(c));
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * data().size()));
}

void BM_DecompressParallel(benchmark::State& st) {
  CompressConfig cfg;
  cfg.dtype = DType::bf16();
  const Container c = compress_stream(data(), cfg);
  for (auto _ : st) benchmark::DoNotOptimize(decompress_stream(c, static_cast<int>(st.range(0))));
  st.SetBytesProcessed(static_cast<int64_t>(st.iterations() * data().size()));
}

void threads(benchmark::internal::Benchmark* b) {
  for (int t = 1; t <= omp_get_max_threads(); t *= 2) b->Arg(t);
}

}  // namespace

BENCHMARK(BM_RegroupReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegroupFast)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_XorReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_XorParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CompressSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CompressParallel)->Apply(threads)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DecompressSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DecompressParallel)->Apply(threads)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include "znn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"
#include "znn/error.hpp"

namespace znn {

std::array<std::uint64_t, 256> exponent_histogram(ByteView input, DType dtype) {
  if (!dtype.is_float()) fail(ErrorCode::OpaqueUnsupported, "opaque data has no exponent field");
  if (input.size() % dtype.element_bytes != 0)
    fail(ErrorCode::MisalignedInput, std::to_string(input.size()) + " bytes is not a multiple of " +
                                         std::to_string(dtype.element_bytes));
  std::array<std::uint64_t, 256> counts{};
  const unsigned eb = dtype.element_bytes;
  const unsigned shift = dtype.fraction_bits;
  const std::uint32_t mask = (1u << dtype.exponent_bits) - 1;
  for (std::size_t i = 0; i < input.size(); i += eb) {
    const std::uint32_t v = eb == 4 ? get_le<std::uint32_t>(&input[i]) : get_le<std::uint16_t>(&input[i]);
    ++counts[(v >> shift) & mask];
  }
  return counts;
}

ZeroStats zero_stats(ByteView input) {
  if (input.empty()) fail(ErrorCode::EmptyInput, "zero_stats on empty input");
  std::uint64_t zeros = 0;
  std::uint64_t run = 0;
  std::uint64_t longest = 0;
  for (std::uint8_t b : input) {
    if (b == 0) {
      ++zeros;
      ++run;
    } else {
      longest = std::max(longest, run);
      run = 0;
    }
  }
  longest = std::max(longest, run);
  return {static_cast<double>(zeros) / static_cast<double>(input.size()), longest};
}

double entropy_bits_per_byte(ByteView input) {
  if (input.empty()) fail(ErrorCode::EmptyInput, "entropy of empty input");
  const Histogram h = byte_histogram(input);
  const double n = static_cast<double>(input.size());
  double bits = 0.0;
  for (std::uint64_t count : h) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    bits -= p * std::log2(p);
  }
  return bits;
}

namespace {

double pct(std::uint64_t part, std::uint64_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

TensorReport container_report(const Container& c, std::string name) {
  TensorReport r;
  r.name = std::move(name);
  r.dtype = c.header.dtype;
  r.raw_bytes = c.header.total_size;
  r.compressed_bytes = c.encoded_size();
  r.compressed_pct = pct(r.compressed_bytes, r.raw_bytes);
  const std::size_t groups = c.header.dtype.group_count;
  r.group_raw_bytes.assign(groups, 0);
  r.group_stored_bytes.assign(groups, 0);
  for (std::uint64_t chunk = 0; chunk < c.header.chunk_count; ++chunk) {
    for (std::size_t g = 0; g < groups; ++g) {
      r.group_raw_bytes[g] += c.header.group_length(chunk);
      r.group_stored_bytes[g] += c.record(chunk, g).stored_len;
    }
  }
  for (std::size_t g = 0; g < groups; ++g) r.groups_pct.push_back(pct(r.group_stored_bytes[g], r.group_raw_bytes[g]));
  return r;
}

ModelReport model_report(std::span<const TensorInput> tensors, const CompressConfig& cfg) {
  ModelReport report;
  for (const TensorInput& t : tensors) {
    CompressConfig tcfg = cfg;
    tcfg.dtype = t.dtype;
    const Container c = compress_stream(t.data, tcfg);
    report.tensors.push_back(container_report(c, t.name));
    report.raw_bytes += report.tensors.back().raw_bytes;
    report.compressed_bytes += report.tensors.back().compressed_bytes;
  }
  report.total_pct = pct(report.compressed_bytes, report.raw_bytes);
  return report;
}

std::string ModelReport::to_json() const {
  nlohmann::json j;
  auto& arr = j["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    arr.push_back({{"name", t.name},
                   {"dtype", std::string(dtype_name(t.dtype))},
                   {"raw_bytes", t.raw_bytes},
                   {"compressed_bytes", t.compressed_bytes},
                   {"compressed_pct", t.compressed_pct},
                   {"groups_pct", t.groups_pct}});
  }
  j["raw_bytes"] = raw_bytes;
  j["compressed_bytes"] = compressed_bytes;
  j["total_pct"] = total_pct;
  return j.dump(2);
}

std::string ModelReport::to_table() const {
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-40s %-6s %14s %8s  %s\n", "tensor", "dtype", "raw bytes", "size %", "groups %");
  out += line;
  for (const auto& t : tensors) {
    std::string groups = "(";
    for (std::size_t g = 0; g < t.groups_pct.size(); ++g) {
      char cell[32];
      std::snprintf(cell, sizeof cell, "%s%.1f%%", g ? ", " : "", t.groups_pct[g]);
      groups += cell;
    }
    groups += ")";
    std::snprintf(line, sizeof line, "%-40s %-6s %14llu %7.1f%%  %s\n", t.name.c_str(),
                  std::string(dtype_name(t.dtype)).c_str(), static_cast<unsigned long long>(t.raw_bytes),
                  t.compressed_pct, groups.c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "%-40s %-6s %14llu %7.1f%%\n", "total", "", static_cast<unsigned long long>(raw_bytes),
                total_pct);
  out += line;
  return out;
}

}  // namespace znn

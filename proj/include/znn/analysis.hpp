#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "znn/bytes.hpp"
#include "znn/dtype.hpp"
#include "znn/pipeline.hpp"

namespace znn {

// counts[v] = number of elements whose exponent field equals v.
std::array<std::uint64_t, 256> exponent_histogram(ByteView input, DType dtype);

struct ZeroStats {
  double zero_fraction = 0.0;
  std::uint64_t longest_zero_run = 0;
};

ZeroStats zero_stats(ByteView input);

// Zero-order empirical entropy in bits per byte.
double entropy_bits_per_byte(ByteView input);

struct TensorInput {
  std::string name;
  DType dtype;
  ByteView data;
};

struct TensorReport {
  std::string name;
  DType dtype;
  std::uint64_t raw_bytes = 0;
  std::uint64_t compressed_bytes = 0;
  double compressed_pct = 0.0;
  std::vector<double> groups_pct;
  std::vector<std::uint64_t> group_raw_bytes;
  std::vector<std::uint64_t> group_stored_bytes;
};

struct ModelReport {
  std::vector<TensorReport> tensors;
  std::uint64_t raw_bytes = 0;
  std::uint64_t compressed_bytes = 0;
  double total_pct = 0.0;

  std::string to_json() const;
  std::string to_table() const;
};

// Compresses each tensor as its own container; `cfg.dtype` is replaced by
// the tensor's dtype.
ModelReport model_report(std::span<const TensorInput> tensors, const CompressConfig& cfg);

// Per-group breakdown of an existing container.
TensorReport container_report(const Container& c, std::string name);

}  // namespace znn

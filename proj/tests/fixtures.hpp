#pragma once

// Test-only data generators and oracles. Nothing here calls into the code
// paths it is used to check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "znn/bytes.hpp"
#include "znn/dtype.hpp"

namespace znn::testing {

Bytes random_bytes(std::size_t n, std::uint64_t seed);

// i.i.d. N(0, sigma) weights rounded to the target float layout.
Bytes gaussian_weights(std::size_t elements, DType dtype, double sigma, std::uint64_t seed);

// FP32 Gaussian weights whose two low mantissa bytes are zero, the shape of
// a model upcast from BF16.
Bytes clean_fp32_weights(std::size_t elements, double sigma, std::uint64_t seed);

// Copy of `base` where roughly `fraction` of the elements get their low
// `low_bytes` bytes re-randomized (a small training step).
Bytes perturb(const Bytes& base, DType dtype, double fraction, unsigned low_bytes, std::uint64_t seed);

// Copy of `base` where each byte is re-randomized with probability
// `fraction`.
Bytes perturb_bytes(const Bytes& base, double fraction, std::uint64_t seed);

// Shuffle whole elements.
Bytes shuffle_elements(const Bytes& data, DType dtype, std::uint64_t seed);

// Zero-order entropy, computed with a plain counting loop.
double entropy_oracle(ByteView data);

// Expected-length cost of an unrestricted Huffman code built with a binary
// heap (textbook construction).
std::uint64_t huffman_cost_oracle(ByteView data, unsigned* max_depth = nullptr);

struct TensorFixture {
  std::string name;
  std::string dtype_tag;
  std::vector<std::uint64_t> shape;
  Bytes data;
};

// Serializes a safetensors file; header JSON is padded with spaces to a
// multiple of 8 like the reference writer.
Bytes make_safetensors(const std::vector<TensorFixture>& tensors, const std::string& metadata_json = "");

void write_file(const std::string& path, ByteView data);
Bytes read_file(const std::string& path);

std::string temp_path(const std::string& name);

}  // namespace znn::testing

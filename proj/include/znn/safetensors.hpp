#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "znn/bytes.hpp"
#include "znn/dtype.hpp"

namespace znn {

struct TensorSpan {
  std::string name;
  DType dtype;
  std::string dtype_tag;  // as written in the file, e.g. "BF16", "I8"
  std::vector<std::uint64_t> shape;
  std::uint64_t begin = 0;  // relative to the data region
  std::uint64_t end = 0;
};

struct SafetensorsLayout {
  std::uint64_t header_len = 0;  // N, the JSON length
  std::string header_json;
  std::uint64_t data_start = 0;  // 8 + N
  std::uint64_t file_size = 0;
  std::vector<TensorSpan> spans;  // sorted by begin

  std::uint64_t data_size() const { return file_size - data_start; }
};

// {F32, BF16, F16} map to float dtypes; everything else is opaque.
DType dtype_from_safetensors(const std::string& tag);

// `prefix` must contain at least the length field and the JSON header.
SafetensorsLayout parse_safetensors(ByteView prefix, std::uint64_t file_size);
inline SafetensorsLayout parse_safetensors(ByteView file) { return parse_safetensors(file, file.size()); }

// Reads just the header of a safetensors file.
SafetensorsLayout read_safetensors_layout(const std::string& path);
bool looks_like_safetensors(const std::string& path);

}  // namespace znn

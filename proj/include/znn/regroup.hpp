#pragma once

// Exponent extraction and byte grouping.
//
// Each float element is read as a little-endian integer. Its most significant
// 16 bits (sign, exponent and the top fraction bits) are rotated left by one,
// which moves the sign to the bottom of that half-word and leaves the 8-bit
// exponent (BF16/FP32) byte-aligned at the top. The rotated value is then
// split most-significant byte first: byte k of every element goes to group k.
// Group 0 therefore carries the exponent; the remaining groups carry fraction
// bytes, with the sign folded into group 1.
//
// BF16 1.0  = 0x3F80     -> 0x7F00     -> groups (7F, 00)
// BF16 -1.0 = 0xBF80     -> 0x7F01     -> groups (7F, 01)
// FP32 1.0  = 0x3F800000 -> 0x7F000000 -> groups (7F, 00, 00, 00)
//
// Opaque data is a single group holding the input unchanged.

#include <vector>

#include "znn/bytes.hpp"
#include "znn/dtype.hpp"

namespace znn {

struct GroupedChunk {
  DType dtype;
  std::size_t element_count = 0;
  std::vector<Bytes> groups;
};

GroupedChunk regroup(ByteView chunk, DType dtype);
Bytes ungroup(const GroupedChunk& grouped);

// Buffer-level kernels used by the pipeline. `groups` must hold
// dtype.group_count spans, each chunk.size() / element_bytes long.
void regroup_into(ByteView chunk, DType dtype, std::span<const MutableByteView> groups);
void ungroup_into(std::span<const ByteView> groups, DType dtype, MutableByteView out);

namespace reference {
// Element-at-a-time versions working on the full-width integer.
void regroup_into(ByteView chunk, DType dtype, std::span<const MutableByteView> groups);
void ungroup_into(std::span<const ByteView> groups, DType dtype, MutableByteView out);
}  // namespace reference

}  // namespace znn

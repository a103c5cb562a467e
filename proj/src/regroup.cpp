#include "znn/regroup.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "znn/error.hpp"

namespace znn {
namespace {

void check_geometry(std::size_t raw_size, DType dtype, std::span<const MutableByteView> groups) {
  if (raw_size % dtype.element_bytes != 0)
    fail(ErrorCode::MisalignedInput,
         std::to_string(raw_size) + " bytes is not a multiple of " + std::to_string(dtype.element_bytes));
  if (groups.size() != dtype.group_count) fail(ErrorCode::LengthMismatch, "wrong number of group buffers");
  const std::size_t n = raw_size / dtype.element_bytes;
  for (const auto& g : groups)
    if (g.size() != n) fail(ErrorCode::LengthMismatch, "group buffer length differs from element count");
}

void check_groups(std::span<const ByteView> groups, DType dtype, std::size_t out_size) {
  if (groups.size() != dtype.group_count) fail(ErrorCode::LengthMismatch, "wrong number of groups");
  const std::size_t n = groups.empty() ? 0 : groups[0].size();
  for (const auto& g : groups)
    if (g.size() != n) fail(ErrorCode::LengthMismatch, "groups have unequal lengths");
  if (out_size != n * dtype.element_bytes) fail(ErrorCode::LengthMismatch, "output size does not match groups");
}

std::vector<MutableByteView> views_of(std::vector<Bytes>& groups) {
  return {groups.begin(), groups.end()};
}

}  // namespace

void regroup_into(ByteView chunk, DType dtype, std::span<const MutableByteView> groups) {
  check_geometry(chunk.size(), dtype, groups);
  const std::size_t n = chunk.size() / dtype.element_bytes;
  const std::uint8_t* in = chunk.data();
  switch (dtype.element_bytes) {
    case 1:
      if (n) std::copy_n(in, n, groups[0].data());
      break;
    case 2: {
      std::uint8_t* g0 = groups[0].data();
      std::uint8_t* g1 = groups[1].data();
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t lo = in[2 * i];
        const std::uint8_t hi = in[2 * i + 1];
        g0[i] = static_cast<std::uint8_t>((hi << 1) | (lo >> 7));
        g1[i] = static_cast<std::uint8_t>((lo << 1) | (hi >> 7));
      }
      break;
    }
    case 4: {
      std::uint8_t* g0 = groups[0].data();
      std::uint8_t* g1 = groups[1].data();
      std::uint8_t* g2 = groups[2].data();
      std::uint8_t* g3 = groups[3].data();
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t b2 = in[4 * i + 2];
        const std::uint8_t b3 = in[4 * i + 3];
        g0[i] = static_cast<std::uint8_t>((b3 << 1) | (b2 >> 7));
        g1[i] = static_cast<std::uint8_t>((b2 << 1) | (b3 >> 7));
        g2[i] = in[4 * i + 1];
        g3[i] = in[4 * i];
      }
      break;
    }
    default:
      fail(ErrorCode::InvalidConfig, "unsupported element width");
  }
}

void ungroup_into(std::span<const ByteView> groups, DType dtype, MutableByteView out) {
  check_groups(groups, dtype, out.size());
  const std::size_t n = out.size() / dtype.element_bytes;
  std::uint8_t* o = out.data();
  switch (dtype.element_bytes) {
    case 1:
      if (n) std::copy_n(groups[0].data(), n, o);
      break;
    case 2: {
      const std::uint8_t* g0 = groups[0].data();
      const std::uint8_t* g1 = groups[1].data();
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) {
        o[2 * i] = static_cast<std::uint8_t>((g1[i] >> 1) | (g0[i] << 7));
        o[2 * i + 1] = static_cast<std::uint8_t>((g0[i] >> 1) | (g1[i] << 7));
      }
      break;
    }
    case 4: {
      const std::uint8_t* g0 = groups[0].data();
      const std::uint8_t* g1 = groups[1].data();
      const std::uint8_t* g2 = groups[2].data();
      const std::uint8_t* g3 = groups[3].data();
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) {
        o[4 * i] = g3[i];
        o[4 * i + 1] = g2[i];
        o[4 * i + 2] = static_cast<std::uint8_t>((g1[i] >> 1) | (g0[i] << 7));
        o[4 * i + 3] = static_cast<std::uint8_t>((g0[i] >> 1) | (g1[i] << 7));
      }
      break;
    }
    default:
      fail(ErrorCode::InvalidConfig, "unsupported element width");
  }
}

GroupedChunk regroup(ByteView chunk, DType dtype) {
  if (chunk.size() % dtype.element_bytes != 0)
    fail(ErrorCode::MisalignedInput,
         std::to_string(chunk.size()) + " bytes is not a multiple of " + std::to_string(dtype.element_bytes));
  GroupedChunk g;
  g.dtype = dtype;
  g.element_count = chunk.size() / dtype.element_bytes;
  g.groups.assign(dtype.group_count, Bytes(g.element_count));
  regroup_into(chunk, dtype, views_of(g.groups));
  return g;
}

Bytes ungroup(const GroupedChunk& grouped) {
  std::vector<ByteView> views(grouped.groups.begin(), grouped.groups.end());
  if (views.size() != grouped.dtype.group_count) fail(ErrorCode::LengthMismatch, "wrong number of groups");
  const std::size_t n = views.empty() ? 0 : views[0].size();
  for (const auto& v : views)
    if (v.size() != n) fail(ErrorCode::LengthMismatch, "groups have unequal lengths");
  Bytes out(n * grouped.dtype.element_bytes);
  ungroup_into(views, grouped.dtype, out);
  return out;
}

namespace reference {
namespace {

std::uint64_t rotate_high_half(std::uint64_t v, unsigned width, bool inverse) {
  const unsigned low_bits = width - 16;
  const std::uint64_t low = v & ((std::uint64_t{1} << low_bits) - 1);
  const auto high = static_cast<std::uint16_t>(v >> low_bits);
  const std::uint16_t r = inverse ? std::rotr(high, 1) : std::rotl(high, 1);
  return (std::uint64_t{r} << low_bits) | low;
}

}  // namespace

void regroup_into(ByteView chunk, DType dtype, std::span<const MutableByteView> groups) {
  check_geometry(chunk.size(), dtype, groups);
  const unsigned eb = dtype.element_bytes;
  const std::size_t n = chunk.size() / eb;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    for (unsigned k = 0; k < eb; ++k) v |= std::uint64_t{chunk[i * eb + k]} << (8 * k);
    if (dtype.is_float()) v = rotate_high_half(v, 8 * eb, false);
    for (unsigned k = 0; k < eb; ++k) groups[k][i] = static_cast<std::uint8_t>(v >> (8 * (eb - 1 - k)));
  }
}

void ungroup_into(std::span<const ByteView> groups, DType dtype, MutableByteView out) {
  check_groups(groups, dtype, out.size());
  const unsigned eb = dtype.element_bytes;
  const std::size_t n = out.size() / eb;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    for (unsigned k = 0; k < eb; ++k) v |= std::uint64_t{groups[k][i]} << (8 * (eb - 1 - k));
    if (dtype.is_float()) v = rotate_high_half(v, 8 * eb, true);
    for (unsigned k = 0; k < eb; ++k) out[i * eb + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
}

}  // namespace reference
}  // namespace znn

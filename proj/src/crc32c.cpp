#include "znn/crc32c.hpp"

#include <array>

#if defined(__x86_64__) || defined(_M_X64)
#include <nmmintrin.h>
#define ZNN_HAVE_X86_CRC 1
#endif

namespace znn {
namespace {

constexpr std::uint32_t kPoly = 0x82F63B78u;

using SliceTables = std::array<std::array<std::uint32_t, 256>, 8>;

constexpr SliceTables make_tables() {
  SliceTables t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t crc = i;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ ((crc & 1u) ? kPoly : 0u);
    t[0][i] = crc;
  }
  for (std::uint32_t i = 0; i < 256; ++i)
    for (std::size_t s = 1; s < 8; ++s) t[s][i] = (t[s - 1][i] >> 8) ^ t[0][t[s - 1][i] & 0xFFu];
  return t;
}

constexpr SliceTables kTables = make_tables();

std::uint32_t update_sliced(std::uint32_t crc, const std::uint8_t* p, std::size_t n) {
  while (n >= 8) {
    const std::uint32_t lo = get_le<std::uint32_t>(p) ^ crc;
    const std::uint32_t hi = get_le<std::uint32_t>(p + 4);
    crc = kTables[7][lo & 0xFF] ^ kTables[6][(lo >> 8) & 0xFF] ^ kTables[5][(lo >> 16) & 0xFF] ^
          kTables[4][lo >> 24] ^ kTables[3][hi & 0xFF] ^ kTables[2][(hi >> 8) & 0xFF] ^
          kTables[1][(hi >> 16) & 0xFF] ^ kTables[0][hi >> 24];
    p += 8;
    n -= 8;
  }
  while (n--) crc = (crc >> 8) ^ kTables[0][(crc ^ *p++) & 0xFF];
  return crc;
}

#ifdef ZNN_HAVE_X86_CRC
__attribute__((target("sse4.2"))) std::uint32_t update_hw(std::uint32_t crc, const std::uint8_t* p,
                                                          std::size_t n) {
  std::uint64_t c = crc;
  while (n >= 8) {
    std::uint64_t word;
    std::memcpy(&word, p, 8);
    c = _mm_crc32_u64(c, word);
    p += 8;
    n -= 8;
  }
  auto c32 = static_cast<std::uint32_t>(c);
  while (n--) c32 = _mm_crc32_u8(c32, *p++);
  return c32;
}

bool cpu_has_sse42() {
  static const bool has = __builtin_cpu_supports("sse4.2");
  return has;
}
#endif

}  // namespace

void Crc32c::update(ByteView data) {
#ifdef ZNN_HAVE_X86_CRC
  if (cpu_has_sse42()) {
    state_ = update_hw(state_, data.data(), data.size());
    return;
  }
#endif
  state_ = update_sliced(state_, data.data(), data.size());
}

std::uint32_t crc32c(ByteView data) {
  Crc32c crc;
  crc.update(data);
  return crc.value();
}

namespace reference {

std::uint32_t crc32c_bitwise(ByteView data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : data) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ ((crc & 1u) ? kPoly : 0u);
  }
  return ~crc;
}

}  // namespace reference
}  // namespace znn

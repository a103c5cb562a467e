#pragma once

#include <cstdint>

#include "znn/bytes.hpp"

namespace znn {

// CRC-32C (Castagnoli, reflected polynomial 0x82F63B78). Uses the SSE4.2
// instruction when the CPU has it and a slicing-by-8 table otherwise.
class Crc32c {
 public:
  void update(ByteView data);
  std::uint32_t value() const { return ~state_; }

 private:
  std::uint32_t state_ = 0xFFFFFFFFu;
};

std::uint32_t crc32c(ByteView data);

namespace reference {
// Bitwise implementation, kept as the oracle for the fast paths.
std::uint32_t crc32c_bitwise(ByteView data);
}  // namespace reference

}  // namespace znn

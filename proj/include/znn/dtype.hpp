#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace znn {

enum class DTypeCode : std::uint8_t { Opaque = 0, Fp32 = 1, Bf16 = 2, Fp16 = 3 };

// Element layout descriptor. Float types get one byte group per byte of the
// element; opaque data is a single undifferentiated stream.
struct DType {
  DTypeCode code = DTypeCode::Opaque;
  std::uint8_t element_bytes = 1;
  std::uint8_t group_count = 1;
  std::uint8_t sign_bits = 0;
  std::uint8_t exponent_bits = 0;
  std::uint8_t fraction_bits = 0;

  static constexpr DType opaque() { return {DTypeCode::Opaque, 1, 1, 0, 0, 0}; }
  static constexpr DType fp32() { return {DTypeCode::Fp32, 4, 4, 1, 8, 23}; }
  static constexpr DType bf16() { return {DTypeCode::Bf16, 2, 2, 1, 8, 7}; }
  static constexpr DType fp16() { return {DTypeCode::Fp16, 2, 2, 1, 5, 10}; }

  constexpr bool is_float() const { return code != DTypeCode::Opaque; }

  friend constexpr bool operator==(const DType&, const DType&) = default;
};

std::optional<DType> dtype_from_code(std::uint8_t code);
// Accepts the CLI spellings: fp32, bf16, fp16, opaque.
std::optional<DType> dtype_from_name(std::string_view name);
std::string_view dtype_name(DType dtype);

}  // namespace znn

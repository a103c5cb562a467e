#include "znn/dtype.hpp"

namespace znn {

std::optional<DType> dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 0: return DType::opaque();
    case 1: return DType::fp32();
    case 2: return DType::bf16();
    case 3: return DType::fp16();
    default: return std::nullopt;
  }
}

std::optional<DType> dtype_from_name(std::string_view name) {
  if (name == "fp32") return DType::fp32();
  if (name == "bf16") return DType::bf16();
  if (name == "fp16") return DType::fp16();
  if (name == "opaque") return DType::opaque();
  return std::nullopt;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype.code) {
    case DTypeCode::Fp32: return "fp32";
    case DTypeCode::Bf16: return "bf16";
    case DTypeCode::Fp16: return "fp16";
    case DTypeCode::Opaque: break;
  }
  return "opaque";
}

}  // namespace znn

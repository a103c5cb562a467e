#include "znn/safetensors.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "znn/error.hpp"

namespace znn {
namespace {

// Element widths for shape validation; unknown tags skip the check.
const std::map<std::string, std::uint64_t>& known_widths() {
  static const std::map<std::string, std::uint64_t> widths = {
      {"F64", 8}, {"F32", 4}, {"F16", 2}, {"BF16", 2}, {"I64", 8}, {"I32", 4},     {"I16", 2},     {"I8", 1},
      {"U64", 8}, {"U32", 4}, {"U16", 2}, {"U8", 1},   {"BOOL", 1}, {"F8_E4M3", 1}, {"F8_E5M2", 1},
  };
  return widths;
}

// Refuse absurd header lengths before allocating.
constexpr std::uint64_t kMaxHeaderLen = 100ull << 20;

}  // namespace

DType dtype_from_safetensors(const std::string& tag) {
  if (tag == "F32") return DType::fp32();
  if (tag == "BF16") return DType::bf16();
  if (tag == "F16") return DType::fp16();
  return DType::opaque();
}

SafetensorsLayout parse_safetensors(ByteView prefix, std::uint64_t file_size) {
  if (prefix.size() < 8 || file_size < 8) fail(ErrorCode::MalformedHeader, "file shorter than the length prefix");
  SafetensorsLayout layout;
  layout.file_size = file_size;
  layout.header_len = get_le<std::uint64_t>(prefix.data());
  if (layout.header_len > file_size - 8 || layout.header_len > kMaxHeaderLen)
    fail(ErrorCode::MalformedHeader, "header length " + std::to_string(layout.header_len) + " exceeds file");
  if (prefix.size() - 8 < layout.header_len) fail(ErrorCode::MalformedHeader, "header truncated");
  layout.data_start = 8 + layout.header_len;
  layout.header_json.assign(reinterpret_cast<const char*>(prefix.data() + 8), layout.header_len);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(layout.header_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("header json: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::MalformedHeader, "header is not a JSON object");

  const std::uint64_t data_size = layout.data_size();
  for (const auto& [name, entry] : j.items()) {
    if (name == "__metadata__") continue;
    TensorSpan span;
    span.name = name;
    try {
      span.dtype_tag = entry.at("dtype").get<std::string>();
      span.shape = entry.at("shape").get<std::vector<std::uint64_t>>();
      const auto offsets = entry.at("data_offsets").get<std::vector<std::uint64_t>>();
      if (offsets.size() != 2) fail(ErrorCode::MalformedHeader, name + ": data_offsets needs two entries");
      span.begin = offsets[0];
      span.end = offsets[1];
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::MalformedHeader, name + ": " + e.what());
    }
    if (span.begin > span.end) fail(ErrorCode::MalformedHeader, name + ": data_offsets are reversed");
    if (span.end > data_size)
      fail(ErrorCode::SpanOutOfBounds, name + ": ends at " + std::to_string(span.end) + " of " + std::to_string(data_size));
    span.dtype = dtype_from_safetensors(span.dtype_tag);
    if (auto it = known_widths().find(span.dtype_tag); it != known_widths().end()) {
      std::uint64_t elements = 1;
      for (std::uint64_t d : span.shape) elements *= d;
      if (elements * it->second != span.end - span.begin)
        fail(ErrorCode::MalformedHeader, name + ": byte range does not match shape");
    }
    layout.spans.push_back(std::move(span));
  }
  std::sort(layout.spans.begin(), layout.spans.end(), [](const TensorSpan& a, const TensorSpan& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  for (std::size_t i = 1; i < layout.spans.size(); ++i)
    if (layout.spans[i].begin < layout.spans[i - 1].end)
      fail(ErrorCode::OverlappingSpans, layout.spans[i - 1].name + " overlaps " + layout.spans[i].name);
  return layout;
}

SafetensorsLayout read_safetensors_layout(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  const std::uint64_t size = std::filesystem::file_size(path);
  Bytes head(8);
  in.read(reinterpret_cast<char*>(head.data()), 8);
  if (in.gcount() != 8) fail(ErrorCode::MalformedHeader, "file shorter than the length prefix");
  const std::uint64_t n = get_le<std::uint64_t>(head.data());
  if (n > size - 8 || n > kMaxHeaderLen) fail(ErrorCode::MalformedHeader, "header length exceeds file");
  head.resize(8 + n);
  in.read(reinterpret_cast<char*>(head.data() + 8), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) fail(ErrorCode::Io, "short read on " + path);
  return parse_safetensors(head, size);
}

bool looks_like_safetensors(const std::string& path) {
  try {
    read_safetensors_layout(path);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace znn

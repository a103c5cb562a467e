#include "fixtures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <stdexcept>

namespace znn::testing {

Bytes random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bytes out(n);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint64_t v = rng();
    std::memcpy(out.data() + i, &v, 8);
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint8_t>(rng());
  return out;
}

namespace {

std::uint16_t fp32_to_bf16(float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  return static_cast<std::uint16_t>((u + 0x7FFFu + ((u >> 16) & 1u)) >> 16);
}

// Round-to-nearest-even float -> half for normal/subnormal finite values.
std::uint16_t fp32_to_fp16(float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (u >> 16) & 0x8000u;
  const int exp = static_cast<int>((u >> 23) & 0xFF) - 127 + 15;
  std::uint32_t mant = u & 0x7FFFFFu;
  if (exp >= 31) return static_cast<std::uint16_t>(sign | 0x7C00u);
  if (exp <= 0) {
    if (exp < -10) return static_cast<std::uint16_t>(sign);
    mant |= 0x800000u;
    const unsigned shift = static_cast<unsigned>(14 - exp);
    std::uint32_t half = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1);
    const std::uint32_t mid = 1u << (shift - 1);
    if (rem > mid || (rem == mid && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(exp) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;
  return static_cast<std::uint16_t>(sign | half);
}

}  // namespace

Bytes gaussian_weights(std::size_t elements, DType dtype, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, static_cast<float>(sigma));
  Bytes out(elements * dtype.element_bytes);
  for (std::size_t i = 0; i < elements; ++i) {
    const float f = dist(rng);
    switch (dtype.code) {
      case DTypeCode::Fp32: {
        const auto u = std::bit_cast<std::uint32_t>(f);
        for (int k = 0; k < 4; ++k) out[4 * i + k] = static_cast<std::uint8_t>(u >> (8 * k));
        break;
      }
      case DTypeCode::Bf16:
      case DTypeCode::Fp16: {
        const std::uint16_t h = dtype.code == DTypeCode::Bf16 ? fp32_to_bf16(f) : fp32_to_fp16(f);
        out[2 * i] = static_cast<std::uint8_t>(h);
        out[2 * i + 1] = static_cast<std::uint8_t>(h >> 8);
        break;
      }
      case DTypeCode::Opaque:
        out[i] = static_cast<std::uint8_t>(std::bit_cast<std::uint32_t>(f));
        break;
    }
  }
  return out;
}

Bytes clean_fp32_weights(std::size_t elements, double sigma, std::uint64_t seed) {
  Bytes out = gaussian_weights(elements, DType::fp32(), sigma, seed);
  for (std::size_t i = 0; i < elements; ++i) out[4 * i] = out[4 * i + 1] = 0;
  return out;
}

Bytes perturb(const Bytes& base, DType dtype, double fraction, unsigned low_bytes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Bytes out = base;
  const std::size_t eb = dtype.element_bytes;
  for (std::size_t i = 0; i + eb <= out.size(); i += eb) {
    if (u(rng) >= fraction) continue;
    for (unsigned k = 0; k < low_bytes && k < eb; ++k) out[i + k] = static_cast<std::uint8_t>(rng());
  }
  return out;
}

Bytes perturb_bytes(const Bytes& base, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Bytes out = base;
  for (auto& b : out)
    if (u(rng) < fraction) b = static_cast<std::uint8_t>(b ^ (1 + rng() % 255));
  return out;
}

Bytes shuffle_elements(const Bytes& data, DType dtype, std::uint64_t seed) {
  const std::size_t eb = dtype.element_bytes;
  const std::size_t n = data.size() / eb;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Bytes out(data.size());
  for (std::size_t i = 0; i < n; ++i) std::memcpy(&out[i * eb], &data[order[i] * eb], eb);
  return out;
}

double entropy_oracle(ByteView data) {
  std::map<std::uint8_t, std::uint64_t> counts;
  for (std::uint8_t b : data) ++counts[b];
  double h = 0.0;
  const double n = static_cast<double>(data.size());
  for (const auto& [sym, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

std::uint64_t huffman_cost_oracle(ByteView data, unsigned* max_depth) {
  std::map<std::uint8_t, std::uint64_t> counts;
  for (std::uint8_t b : data) ++counts[b];
  if (counts.size() <= 1) {
    if (max_depth) *max_depth = counts.empty() ? 0 : 1;
    return data.size();
  }
  // Node weights with depth tracking: cost = sum of internal node weights.
  using Node = std::pair<std::uint64_t, unsigned>;  // weight, height
  std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
  for (const auto& [sym, c] : counts) heap.push({c, 0});
  std::uint64_t cost = 0;
  unsigned height = 0;
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    cost += a.first + b.first;
    height = std::max(a.second, b.second) + 1;
    heap.push({a.first + b.first, height});
  }
  if (max_depth) *max_depth = heap.top().second;
  return cost;
}

Bytes make_safetensors(const std::vector<TensorFixture>& tensors, const std::string& metadata_json) {
  std::string header = "{";
  bool first = true;
  if (!metadata_json.empty()) {
    header += "\"__metadata__\":" + metadata_json;
    first = false;
  }
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (!first) header += ",";
    first = false;
    header += "\"" + t.name + "\":{\"dtype\":\"" + t.dtype_tag + "\",\"shape\":[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) header += (i ? "," : "") + std::to_string(t.shape[i]);
    header += "],\"data_offsets\":[" + std::to_string(offset) + "," + std::to_string(offset + t.data.size()) + "]}";
    offset += t.data.size();
  }
  header += "}";
  while (header.size() % 8 != 0) header += ' ';
  Bytes out(8);
  const std::uint64_t n = header.size();
  for (int k = 0; k < 8; ++k) out[k] = static_cast<std::uint8_t>(n >> (8 * k));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& t : tensors) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void write_file(const std::string& path, ByteView data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("cannot write " + path);
}

Bytes read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "znn-tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace znn::testing

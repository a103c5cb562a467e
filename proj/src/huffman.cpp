#include "znn/entropy.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "znn/error.hpp"

namespace znn {

Histogram byte_histogram(ByteView input) {
  // Four interleaved tables avoid store-to-load stalls on runs of equal bytes.
  std::array<std::array<std::uint32_t, 256>, 4> h{};
  const std::uint8_t* p = input.data();
  std::size_t n = input.size();
  Histogram total{};
  while (n > 0) {
    // Keep the 32-bit counters from overflowing on huge inputs.
    std::size_t block = std::min<std::size_t>(n, std::size_t{1} << 30);
    n -= block;
    std::size_t i = 0;
    for (; i + 4 <= block; i += 4) {
      ++h[0][p[i]];
      ++h[1][p[i + 1]];
      ++h[2][p[i + 2]];
      ++h[3][p[i + 3]];
    }
    for (; i < block; ++i) ++h[0][p[i]];
    p += block;
    for (std::size_t s = 0; s < 256; ++s) {
      total[s] += std::uint64_t{h[0][s]} + h[1][s] + h[2][s] + h[3][s];
      h[0][s] = h[1][s] = h[2][s] = h[3][s] = 0;
    }
  }
  return total;
}

HuffmanTable HuffmanTable::build(const Histogram& histogram) {
  HuffmanTable t;
  std::vector<std::uint16_t> symbols;
  for (unsigned s = 0; s < 256; ++s)
    if (histogram[s] != 0) symbols.push_back(static_cast<std::uint16_t>(s));
  if (symbols.empty()) return t;
  if (symbols.size() == 1) {
    t.lengths[symbols[0]] = 1;
    return t;
  }
  std::stable_sort(symbols.begin(), symbols.end(),
                   [&](std::uint16_t a, std::uint16_t b) { return histogram[a] < histogram[b]; });

  // Package-merge. Each level's list is the merge of the leaves with the
  // pairwise packages of the previous level (leaves first on equal weight).
  // Only the leaf/package composition of each list is kept; the selected
  // prefix at the top level is unwound level by level.
  const std::size_t n = symbols.size();
  std::vector<std::uint64_t> leaf_w(n);
  for (std::size_t i = 0; i < n; ++i) leaf_w[i] = histogram[symbols[i]];

  std::vector<std::vector<bool>> is_leaf(kMaxCodeLength);
  std::vector<std::uint64_t> prev = leaf_w;
  is_leaf[0].assign(n, true);
  for (unsigned level = 1; level < kMaxCodeLength; ++level) {
    std::vector<std::uint64_t> packages(prev.size() / 2);
    for (std::size_t i = 0; i < packages.size(); ++i) packages[i] = prev[2 * i] + prev[2 * i + 1];
    std::vector<std::uint64_t> merged;
    merged.reserve(n + packages.size());
    auto& flags = is_leaf[level];
    flags.reserve(n + packages.size());
    std::size_t a = 0, b = 0;
    while (a < n || b < packages.size()) {
      if (b == packages.size() || (a < n && leaf_w[a] <= packages[b])) {
        merged.push_back(leaf_w[a++]);
        flags.push_back(true);
      } else {
        merged.push_back(packages[b++]);
        flags.push_back(false);
      }
    }
    prev = std::move(merged);
  }

  std::size_t take = 2 * n - 2;
  for (int level = kMaxCodeLength - 1; level >= 0 && take > 0; --level) {
    const auto& flags = is_leaf[level];
    std::size_t leaves = 0;
    for (std::size_t i = 0; i < take; ++i) leaves += flags[i];
    for (std::size_t i = 0; i < leaves; ++i) ++t.lengths[symbols[i]];
    take = 2 * (take - leaves);
  }
  return t;
}

std::uint64_t HuffmanTable::cost_bits(const Histogram& histogram) const {
  std::uint64_t bits = 0;
  for (unsigned s = 0; s < 256; ++s) bits += histogram[s] * lengths[s];
  return bits;
}

std::uint32_t HuffmanTable::kraft_sum() const {
  std::uint32_t sum = 0;
  for (std::uint8_t len : lengths)
    if (len > 0 && len <= kMaxCodeLength) sum += 1u << (kMaxCodeLength - len);
  return sum;
}

std::array<std::uint16_t, 256> HuffmanTable::canonical_codes() const {
  std::array<std::uint16_t, 256> codes{};
  std::array<std::uint16_t, kMaxCodeLength + 2> count{};
  for (std::uint8_t len : lengths) ++count[len];
  count[0] = 0;
  std::array<std::uint16_t, kMaxCodeLength + 2> next{};
  std::uint16_t code = 0;
  for (unsigned len = 1; len <= kMaxCodeLength; ++len) {
    code = static_cast<std::uint16_t>((code + count[len - 1]) << 1);
    next[len] = code;
  }
  for (unsigned s = 0; s < 256; ++s)
    if (lengths[s] != 0) codes[s] = next[lengths[s]]++;
  return codes;
}

namespace {

std::uint16_t reverse_bits(std::uint16_t code, unsigned len) {
  std::uint16_t r = 0;
  for (unsigned i = 0; i < len; ++i) r = static_cast<std::uint16_t>((r << 1) | ((code >> i) & 1u));
  return r;
}

bool all_zero(ByteView input) {
  return std::all_of(input.begin(), input.end(), [](std::uint8_t b) { return b == 0; });
}

void write_lengths(const HuffmanTable& t, std::uint8_t* out) {
  for (std::size_t i = 0; i < kHuffmanTableBytes; ++i)
    out[i] = static_cast<std::uint8_t>(t.lengths[2 * i] | (t.lengths[2 * i + 1] << 4));
}

}  // namespace

std::uint64_t huffman_encoded_size(const Histogram& histogram) {
  const HuffmanTable t = HuffmanTable::build(histogram);
  return kHuffmanTableBytes + (t.cost_bits(histogram) + 7) / 8;
}

GroupEncoding huffman_compress(ByteView input) { return huffman_compress(input, byte_histogram(input)); }

GroupEncoding huffman_compress(ByteView input, const Histogram& histogram) {
  if (input.empty()) fail(ErrorCode::EmptyInput, "huffman_compress on empty input");
  GroupEncoding enc;
  enc.raw_len = input.size();
  if (histogram[0] == input.size()) {
    enc.method = Method::ZeroTruncated;
    return enc;
  }
  const HuffmanTable table = HuffmanTable::build(histogram);
  const std::uint64_t bits = table.cost_bits(histogram);
  const std::uint64_t size = kHuffmanTableBytes + (bits + 7) / 8;
  if (size >= input.size()) {
    enc.method = Method::Stored;
    enc.payload.assign(input.begin(), input.end());
    return enc;
  }

  const auto canonical = table.canonical_codes();
  std::array<std::uint32_t, 256> emit{};  // reversed code | length << 16
  for (unsigned s = 0; s < 256; ++s)
    emit[s] = reverse_bits(canonical[s], table.lengths[s]) | (std::uint32_t{table.lengths[s]} << 16);

  // 8 bytes of slack for the word-sized stores below.
  enc.payload.assign(size + 8, 0);
  write_lengths(table, enc.payload.data());
  std::uint8_t* out = enc.payload.data() + kHuffmanTableBytes;
  std::uint64_t acc = 0;
  unsigned fill = 0;
  const std::uint8_t* in = input.data();
  const std::size_t n = input.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (unsigned k = 0; k < 4; ++k) {
      const std::uint32_t e = emit[in[i + k]];
      acc |= std::uint64_t{e & 0xFFFFu} << fill;
      fill += e >> 16;
    }
    // At most 48 new bits; flush whole bytes.
    put_le<std::uint64_t>(out, acc);
    const unsigned bytes = fill >> 3;
    out += bytes;
    acc = bytes == 8 ? 0 : acc >> (8 * bytes);
    fill &= 7;
  }
  for (; i < n; ++i) {
    const std::uint32_t e = emit[in[i]];
    acc |= std::uint64_t{e & 0xFFFFu} << fill;
    fill += e >> 16;
  }
  while (fill > 0) {
    *out++ = static_cast<std::uint8_t>(acc);
    acc >>= 8;
    fill = fill > 8 ? fill - 8 : 0;
  }
  enc.method = Method::Huffman;
  enc.payload.resize(size);
  return enc;
}

Bytes huffman_decompress(ByteView payload, std::size_t raw_len) {
  Bytes out(raw_len);
  huffman_decompress_into(payload, out);
  return out;
}

void huffman_decompress_into(ByteView payload, MutableByteView out) {
  if (payload.size() < kHuffmanTableBytes) fail(ErrorCode::TruncatedPayload, "huffman table truncated");
  HuffmanTable table;
  for (std::size_t i = 0; i < kHuffmanTableBytes; ++i) {
    table.lengths[2 * i] = payload[i] & 0x0F;
    table.lengths[2 * i + 1] = payload[i] >> 4;
  }
  unsigned used = 0;
  for (std::uint8_t len : table.lengths) {
    if (len > kMaxCodeLength) fail(ErrorCode::CorruptTable, "code length " + std::to_string(len) + " above limit");
    used += len != 0;
  }
  if (table.kraft_sum() > (1u << kMaxCodeLength)) fail(ErrorCode::CorruptTable, "code lengths violate Kraft inequality");
  if (used == 0 && !out.empty()) fail(ErrorCode::CorruptTable, "empty code table");

  // entry = symbol | length << 8; length 0 marks an unassigned code.
  std::array<std::uint16_t, 1u << kMaxCodeLength> lookup{};
  const auto canonical = table.canonical_codes();
  for (unsigned s = 0; s < 256; ++s) {
    const unsigned len = table.lengths[s];
    if (len == 0) continue;
    const std::uint16_t rev = reverse_bits(canonical[s], len);
    const auto entry = static_cast<std::uint16_t>(s | (len << 8));
    for (unsigned fillv = rev; fillv < lookup.size(); fillv += 1u << len) lookup[fillv] = entry;
  }

  const std::uint8_t* src = payload.data() + kHuffmanTableBytes;
  const std::size_t src_size = payload.size() - kHuffmanTableBytes;
  const std::uint64_t avail_bits = std::uint64_t{src_size} * 8;
  constexpr std::uint64_t kMask = (1u << kMaxCodeLength) - 1;

  std::uint64_t buf = 0;
  unsigned count = 0;
  std::size_t pos = 0;
  std::uint64_t consumed = 0;  // bits taken from the stream
  bool bad_code = false;

  std::uint8_t* dst = out.data();
  const std::size_t n = out.size();
  std::size_t i = 0;

  // Fast path: word refills while 8 source bytes remain, 4 symbols per refill.
  while (i + 4 <= n && pos + 8 <= src_size) {
    buf |= get_le<std::uint64_t>(src + pos) << count;
    pos += (63 - count) >> 3;
    count |= 56;
    for (int k = 0; k < 4; ++k) {
      const std::uint16_t e = lookup[buf & kMask];
      const unsigned len = e >> 8;
      dst[i++] = static_cast<std::uint8_t>(e);
      buf >>= len;
      count -= len;
      bad_code |= len == 0;
    }
    if (bad_code) break;
  }
  if (bad_code) fail(ErrorCode::CorruptPayload, "invalid huffman code");
  consumed = std::uint64_t{pos} * 8 - count;

  // Tail: byte refills, zero-filling past the end so truncation is caught by
  // the bit count rather than by a bad lookup.
  while (i < n) {
    while (count <= 56) {
      if (pos < src_size) buf |= std::uint64_t{src[pos]} << count;
      ++pos;
      count += 8;
    }
    const std::uint16_t e = lookup[buf & kMask];
    const unsigned len = e >> 8;
    if (len == 0) {
      if (consumed + kMaxCodeLength > avail_bits) fail(ErrorCode::TruncatedPayload, "huffman stream ends early");
      fail(ErrorCode::CorruptPayload, "invalid huffman code");
    }
    dst[i++] = static_cast<std::uint8_t>(e);
    buf >>= len;
    count -= len;
    consumed += len;
  }
  if (consumed > avail_bits) fail(ErrorCode::TruncatedPayload, "huffman stream ends early");
  if (avail_bits - consumed >= 8) fail(ErrorCode::ExcessBits, std::to_string(avail_bits - consumed) + " trailing bits");
  const unsigned pad = static_cast<unsigned>(avail_bits - consumed);
  if (pad > 0 && (src[src_size - 1] >> (8 - pad)) != 0) fail(ErrorCode::CorruptPayload, "nonzero padding bits");
}

}  // namespace znn

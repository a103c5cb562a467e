#include "znn/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>
#include <istream>
#include <ostream>
#include <string>

#include "znn/analysis.hpp"
#include "znn/crc32c.hpp"
#include "znn/error.hpp"
#include "znn/regroup.hpp"

namespace znn {

void CompressConfig::validate() const {
  if (chunk_size == 0 || chunk_size % (8u * dtype.element_bytes) != 0)
    fail(ErrorCode::InvalidConfig, "chunk size must be a positive multiple of " + std::to_string(8 * dtype.element_bytes));
  if (!(incompressible_threshold > 0.0 && incompressible_threshold <= 1.0))
    fail(ErrorCode::InvalidConfig, "incompressible threshold must be in (0, 1]");
  if (worker_count < 0) fail(ErrorCode::InvalidConfig, "negative worker count");
}

ProbeDecision GroupProbeState::decide(std::size_t group) {
  if (remaining_[group] > 0) {
    --remaining_[group];
    return ProbeDecision::StoreRaw;
  }
  return ProbeDecision::Probe;
}

void GroupProbeState::record(std::size_t group, bool incompressible) {
  last_incompressible_[group] = incompressible;
  remaining_[group] = incompressible ? skip_window_ : 0;
}

std::size_t batch_chunks(int worker_count) {
  const int workers = worker_count > 0 ? worker_count : omp_get_max_threads();
  return std::max<std::size_t>(16, 4 * static_cast<std::size_t>(workers));
}

namespace {

int resolve_workers(int worker_count) { return worker_count > 0 ? worker_count : omp_get_max_threads(); }

// Runs body(i) for i in [0, n) on the OpenMP team and rethrows the first
// exception on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(znn_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

bool is_all_zero(const Histogram& h, std::size_t len) { return h[0] == len; }

double encoded_ratio(std::size_t encoded, std::size_t raw) {
  return encoded >= raw ? 1.0 : static_cast<double>(encoded) / static_cast<double>(raw);
}

struct GroupPlan {
  Method method = Method::Stored;  // final method to encode with
  Histogram histogram{};
  GroupEncoding lz;  // speculative LZ result, when selected
};

struct ChunkWork {
  Bytes grouped;  // group_count runs of group_len bytes
  std::size_t group_len = 0;
  std::vector<GroupPlan> groups;

  ByteView group(std::size_t g) const { return ByteView(grouped).subspan(g * group_len, group_len); }
};

std::vector<MutableByteView> group_views(Bytes& buf, std::size_t groups, std::size_t len) {
  std::vector<MutableByteView> v;
  for (std::size_t g = 0; g < groups; ++g) v.emplace_back(buf.data() + g * len, len);
  return v;
}

}  // namespace

ChunkEncoder::ChunkEncoder(const CompressConfig& cfg) : cfg_(cfg), probes_(cfg.dtype.group_count, cfg.skip_window) {
  cfg_.validate();
}

std::vector<EncodedChunk> ChunkEncoder::encode_batch(ByteView data) {
  const DType dtype = cfg_.dtype;
  const std::size_t groups = dtype.group_count;
  const std::size_t chunk_size = cfg_.chunk_size;
  const std::size_t n_chunks = (data.size() + chunk_size - 1) / chunk_size;
  if (data.size() % dtype.element_bytes != 0)
    fail(ErrorCode::MisalignedInput, std::to_string(data.size()) + " bytes is not a whole number of " +
                                         std::string(dtype_name(dtype)) + " elements");

  std::vector<ChunkWork> work(n_chunks);
  const bool stored_only = cfg_.mode == SelectionMode::ForceStored;

  // Phase 1 (parallel): regroup, histogram, method selection, and the LZ
  // encodings whose size the probe step needs.
  parallel_for(n_chunks, cfg_.worker_count, [&](std::size_t c) {
    const ByteView chunk = data.subspan(c * chunk_size, std::min(chunk_size, data.size() - c * chunk_size));
    ChunkWork& w = work[c];
    w.group_len = chunk.size() / dtype.element_bytes;
    w.grouped.resize(chunk.size());
    regroup_into(chunk, dtype, group_views(w.grouped, groups, w.group_len));
    w.groups.resize(groups);
    if (stored_only) return;
    for (std::size_t g = 0; g < groups; ++g) {
      GroupPlan& p = w.groups[g];
      const ByteView bytes = w.group(g);
      p.histogram = byte_histogram(bytes);
      if (is_all_zero(p.histogram, bytes.size())) {
        p.method = Method::ZeroTruncated;
        continue;
      }
      p.method = select_method(bytes, cfg_.mode);
      if (p.method == Method::LzEntropy) p.lz = lz_entropy_compress(bytes);
    }
  });

  // Phase 2 (sequential, chunk order): probe/skip decisions.
  if (!stored_only) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      ChunkWork& w = work[c];
      for (std::size_t g = 0; g < groups; ++g) {
        GroupPlan& p = w.groups[g];
        const bool forced_probe = always_probed(dtype, g);
        if (!forced_probe && probes_.decide(g) == ProbeDecision::StoreRaw) {
          p.method = Method::Stored;
          p.lz = {};
          continue;
        }
        double ratio = 0.0;
        if (p.method == Method::Huffman)
          ratio = encoded_ratio(huffman_encoded_size(p.histogram), w.group_len);
        else if (p.method == Method::LzEntropy)
          ratio = encoded_ratio(p.lz.payload.size(), w.group_len);
        if (!forced_probe) probes_.record(g, ratio > cfg_.incompressible_threshold);
      }
    }
  }

  // Phase 3 (parallel): final encodings.
  std::vector<EncodedChunk> out(n_chunks);
  parallel_for(n_chunks, cfg_.worker_count, [&](std::size_t c) {
    ChunkWork& w = work[c];
    EncodedChunk& e = out[c];
    e.records.resize(groups);
    e.payload.reserve(w.grouped.size());
    for (std::size_t g = 0; g < groups; ++g) {
      GroupPlan& p = w.groups[g];
      const ByteView bytes = w.group(g);
      GroupEncoding enc;
      if (bytes.empty()) {
        enc.method = Method::Stored;
      } else if (p.method == Method::LzEntropy) {
        enc = std::move(p.lz);
      } else if (p.method == Method::Huffman) {
        enc = huffman_compress(bytes, p.histogram);
      } else {
        enc = encode_group(bytes, p.method);
      }
      e.records[g] = {enc.method, static_cast<std::uint32_t>(enc.payload.size())};
      e.payload.insert(e.payload.end(), enc.payload.begin(), enc.payload.end());
    }
    Bytes().swap(w.grouped);
  });
  return out;
}

namespace {

ContainerHeader make_header(const CompressConfig& cfg, std::uint64_t total, const ContainerOptions& options) {
  ContainerHeader h = ContainerHeader::make(cfg.dtype, cfg.chunk_size, total);
  h.safetensors = options.safetensors;
  if (options.base_digest) {
    h.delta = true;
    h.base_digest = *options.base_digest;
  }
  validate_header(h);
  return h;
}

void check_alignment(std::uint64_t size, DType dtype) {
  if (size % dtype.element_bytes != 0)
    fail(ErrorCode::MisalignedInput, std::to_string(size) + " bytes is not a whole number of " +
                                         std::string(dtype_name(dtype)) + " elements");
}

}  // namespace

Container compress_stream(ByteView input, const CompressConfig& cfg, const ContainerOptions& options) {
  cfg.validate();
  check_alignment(input.size(), cfg.dtype);
  Container c;
  c.header = make_header(cfg, input.size(), options);
  c.table.reserve(c.header.chunk_count * cfg.dtype.group_count);

  ChunkEncoder encoder(cfg);
  const std::size_t batch_bytes = batch_chunks(cfg.worker_count) * cfg.chunk_size;
  for (std::size_t at = 0; at < input.size(); at += batch_bytes) {
    auto chunks = encoder.encode_batch(input.subspan(at, std::min(batch_bytes, input.size() - at)));
    for (auto& e : chunks) {
      c.table.insert(c.table.end(), e.records.begin(), e.records.end());
      c.payload.insert(c.payload.end(), e.payload.begin(), e.payload.end());
    }
  }
  c.checksum = crc32c(c.payload);
  return c;
}

void decode_chunk_into(const ContainerHeader& h, std::span<const ChunkGroupRecord> records, ByteView chunk_payload,
                       MutableByteView out) {
  const std::size_t groups = h.dtype.group_count;
  const std::size_t group_len = out.size() / h.dtype.element_bytes;
  if (records.size() != groups) fail(ErrorCode::LengthMismatch, "chunk record count differs from group count");
  Bytes grouped(out.size());
  std::vector<ByteView> views;
  std::size_t at = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const ChunkGroupRecord& r = records[g];
    if (at + r.stored_len > chunk_payload.size()) fail(ErrorCode::TruncatedPayload, "group payload past chunk end");
    MutableByteView dst(grouped.data() + g * group_len, group_len);
    decode_group(r.method, chunk_payload.subspan(at, r.stored_len), dst);
    views.emplace_back(dst.data(), dst.size());
    at += r.stored_len;
  }
  if (at != chunk_payload.size()) fail(ErrorCode::LengthMismatch, "chunk payload has trailing bytes");
  ungroup_into(views, h.dtype, out);
}

namespace {

void check_container(const Container& c) {
  validate_header(c.header);
  validate_table(c.header, c.table);
  const auto offsets = compute_payload_offsets(c.table, c.header.dtype.group_count);
  if (offsets.payload_size() != c.payload.size())
    fail(ErrorCode::LengthMismatch, "payload size " + std::to_string(c.payload.size()) + " != table sum " +
                                        std::to_string(offsets.payload_size()));
}

ByteView chunk_payload(const Container& c, const PayloadOffsets& offsets, std::uint64_t chunk) {
  const std::uint64_t begin = offsets.chunk_begin(chunk);
  const std::uint64_t end = chunk + 1 < c.header.chunk_count ? offsets.chunk_begin(chunk + 1) : offsets.payload_size();
  return ByteView(c.payload).subspan(begin, end - begin);
}

}  // namespace

Bytes decompress_stream(const Container& c, int worker_count) {
  check_container(c);
  if (!c.checksum_ok()) fail(ErrorCode::ChecksumMismatch, "payload CRC-32C does not match");
  const auto offsets = compute_payload_offsets(c.table, c.header.dtype.group_count);
  Bytes out(c.header.total_size);
  const std::size_t groups = c.header.dtype.group_count;
  parallel_for(c.header.chunk_count, worker_count, [&](std::size_t chunk) {
    const MutableByteView dst(out.data() + chunk * std::uint64_t{c.header.chunk_size}, c.header.chunk_length(chunk));
    decode_chunk_into(c.header, std::span(c.table).subspan(chunk * groups, groups), chunk_payload(c, offsets, chunk),
                      dst);
  });
  return out;
}

Bytes decompress_chunk(const Container& c, std::uint64_t chunk) {
  check_container(c);
  if (chunk >= c.header.chunk_count) fail(ErrorCode::InvalidConfig, "chunk index out of range");
  const auto offsets = compute_payload_offsets(c.table, c.header.dtype.group_count);
  const std::size_t groups = c.header.dtype.group_count;
  Bytes out(c.header.chunk_length(chunk));
  decode_chunk_into(c.header, std::span(c.table).subspan(chunk * groups, groups), chunk_payload(c, offsets, chunk), out);
  return out;
}

StreamResult compress_to(const ReadFn& read, std::uint64_t total_size, std::ostream& out, const CompressConfig& cfg,
                         const ContainerOptions& options) {
  cfg.validate();
  check_alignment(total_size, cfg.dtype);
  StreamResult result;
  result.header = make_header(cfg, total_size, options);
  const ContainerHeader& h = result.header;

  const std::streampos start = out.tellp();
  if (start == std::streampos(-1)) fail(ErrorCode::Io, "output stream is not seekable");
  const Bytes header_bytes = encode_header(h);
  out.write(reinterpret_cast<const char*>(header_bytes.data()), static_cast<std::streamsize>(header_bytes.size()));
  const Bytes placeholder(h.table_size(), 0);
  out.write(reinterpret_cast<const char*>(placeholder.data()), static_cast<std::streamsize>(placeholder.size()));

  ChunkEncoder encoder(cfg);
  Crc32c crc;
  std::uint64_t payload_size = 0;
  const std::uint64_t batch_bytes = batch_chunks(cfg.worker_count) * std::uint64_t{cfg.chunk_size};
  Bytes buffer;
  for (std::uint64_t at = 0; at < total_size; at += batch_bytes) {
    buffer.resize(std::min(batch_bytes, total_size - at));
    read(at, buffer);
    for (auto& e : encoder.encode_batch(buffer)) {
      result.table.insert(result.table.end(), e.records.begin(), e.records.end());
      crc.update(e.payload);
      payload_size += e.payload.size();
      out.write(reinterpret_cast<const char*>(e.payload.data()), static_cast<std::streamsize>(e.payload.size()));
    }
    if (!out) fail(ErrorCode::Io, "write failed");
  }
  Bytes trailer;
  append_le<std::uint32_t>(trailer, crc.value());
  out.write(reinterpret_cast<const char*>(trailer.data()), 4);
  const std::streampos end = out.tellp();

  Bytes table_bytes;
  encode_table(result.table, table_bytes);
  out.seekp(start + static_cast<std::streamoff>(header_bytes.size()));
  out.write(reinterpret_cast<const char*>(table_bytes.data()), static_cast<std::streamsize>(table_bytes.size()));
  out.seekp(end);
  if (!out) fail(ErrorCode::Io, "write failed");
  result.encoded_size = header_bytes.size() + table_bytes.size() + payload_size + kChecksumSize;
  return result;
}

namespace {

void read_exact(std::istream& in, std::uint8_t* dst, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) fail(ErrorCode::TruncatedPayload, std::string(what) + " truncated");
}

}  // namespace

ContainerHeader decompress_from(std::istream& in, const WriteFn& write, int worker_count) {
  Bytes head(kDeltaHeaderSize);
  read_exact(in, head.data(), kFixedHeaderSize, "header");
  if ((head[5] & kFlagDelta) != 0) read_exact(in, head.data() + kFixedHeaderSize, 32, "header");
  const ContainerHeader h = decode_header(head);
  const std::size_t groups = h.dtype.group_count;

  Bytes table_bytes(h.table_size());
  read_exact(in, table_bytes.data(), table_bytes.size(), "chunk table");
  const auto table = decode_table(table_bytes, h.chunk_count * groups);
  validate_table(h, table);
  const auto offsets = compute_payload_offsets(table, groups);

  Crc32c crc;
  const std::uint64_t batch = batch_chunks(worker_count);
  Bytes payload;
  Bytes out;
  for (std::uint64_t first = 0; first < h.chunk_count; first += batch) {
    const std::uint64_t last = std::min(h.chunk_count, first + batch);
    const std::uint64_t begin = offsets.chunk_begin(first);
    const std::uint64_t end = last < h.chunk_count ? offsets.chunk_begin(last) : offsets.payload_size();
    payload.resize(end - begin);
    read_exact(in, payload.data(), payload.size(), "payload");
    crc.update(payload);

    const std::uint64_t out_begin = first * std::uint64_t{h.chunk_size};
    const std::uint64_t out_end = std::min(h.total_size, last * std::uint64_t{h.chunk_size});
    out.resize(out_end - out_begin);
    parallel_for(last - first, worker_count, [&](std::size_t i) {
      const std::uint64_t chunk = first + i;
      const std::uint64_t pb = offsets.chunk_begin(chunk) - begin;
      const std::uint64_t pe = (chunk + 1 < h.chunk_count ? offsets.chunk_begin(chunk + 1) : offsets.payload_size()) - begin;
      decode_chunk_into(h, std::span(table).subspan(chunk * groups, groups), ByteView(payload).subspan(pb, pe - pb),
                        MutableByteView(out.data() + i * std::uint64_t{h.chunk_size}, h.chunk_length(chunk)));
    });
    write(out);
  }
  std::uint8_t trailer[4];
  read_exact(in, trailer, 4, "checksum");
  if (get_le<std::uint32_t>(trailer) != crc.value()) fail(ErrorCode::ChecksumMismatch, "payload CRC-32C does not match");
  return h;
}

namespace reference {

Container compress_stream_serial(ByteView input, const CompressConfig& cfg, const ContainerOptions& options) {
  cfg.validate();
  check_alignment(input.size(), cfg.dtype);
  Container c;
  c.header = make_header(cfg, input.size(), options);
  const DType dtype = cfg.dtype;
  GroupProbeState probes(dtype.group_count, cfg.skip_window);

  for (std::uint64_t chunk = 0; chunk < c.header.chunk_count; ++chunk) {
    const ByteView raw = input.subspan(chunk * cfg.chunk_size, c.header.chunk_length(chunk));
    const std::size_t len = raw.size() / dtype.element_bytes;
    std::vector<Bytes> groups(dtype.group_count, Bytes(len));
    std::vector<MutableByteView> views(groups.begin(), groups.end());
    reference::regroup_into(raw, dtype, views);

    for (std::size_t g = 0; g < groups.size(); ++g) {
      const Bytes& bytes = groups[g];
      GroupEncoding enc;
      if (cfg.mode == SelectionMode::ForceStored) {
        enc = encode_group(bytes, Method::Stored);
      } else if (!always_probed(dtype, g) && probe_or_skip(probes, g) == ProbeDecision::StoreRaw) {
        enc = encode_group(bytes, Method::Stored);
      } else {
        enc = encode_group(bytes, select_method(bytes, cfg.mode));
        const double ratio = encoded_ratio(enc.payload.size(), bytes.size());
        if (!always_probed(dtype, g)) probes.record(g, ratio > cfg.incompressible_threshold);
      }
      c.table.push_back({enc.method, static_cast<std::uint32_t>(enc.payload.size())});
      c.payload.insert(c.payload.end(), enc.payload.begin(), enc.payload.end());
    }
  }
  c.checksum = crc32c(c.payload);
  return c;
}

Bytes decompress_stream_serial(const Container& c) {
  check_container(c);
  if (!c.checksum_ok()) fail(ErrorCode::ChecksumMismatch, "payload CRC-32C does not match");
  const DType dtype = c.header.dtype;
  Bytes out;
  out.reserve(c.header.total_size);
  std::size_t at = 0;
  for (std::uint64_t chunk = 0; chunk < c.header.chunk_count; ++chunk) {
    const std::size_t len = c.header.group_length(chunk);
    std::vector<Bytes> groups(dtype.group_count, Bytes(len));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const ChunkGroupRecord& r = c.record(chunk, g);
      decode_group(r.method, ByteView(c.payload).subspan(at, r.stored_len), groups[g]);
      at += r.stored_len;
    }
    std::vector<ByteView> views(groups.begin(), groups.end());
    Bytes raw(len * dtype.element_bytes);
    reference::ungroup_into(views, dtype, raw);
    out.insert(out.end(), raw.begin(), raw.end());
  }
  return out;
}

}  // namespace reference
}  // namespace znn

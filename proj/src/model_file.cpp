#include "znn/model_file.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

#include "json.hpp"
#include "znn/delta.hpp"
#include "znn/error.hpp"

namespace znn {
namespace fs = std::filesystem;

std::vector<Segment> plan_segments(const SafetensorsLayout& layout) {
  std::vector<Segment> segs;
  segs.push_back({"__header__", DType::opaque(), 0, layout.data_start});
  std::uint64_t cursor = 0;  // within the data region
  std::size_t gaps = 0;
  auto filler = [&](std::uint64_t until) {
    if (until > cursor)
      segs.push_back({"__gap" + std::to_string(gaps++) + "__", DType::opaque(), layout.data_start + cursor, until - cursor});
  };
  for (const TensorSpan& s : layout.spans) {
    filler(s.begin);
    if (s.end > s.begin) segs.push_back({s.name, s.dtype, layout.data_start + s.begin, s.end - s.begin});
    cursor = std::max(cursor, s.end);
  }
  filler(layout.data_size());
  return segs;
}

namespace {

std::uint64_t file_size_of(const std::string& path) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) fail(ErrorCode::Io, "cannot stat " + path + ": " + ec.message());
  return size;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return in;
}

void read_at(std::ifstream& in, std::uint64_t offset, MutableByteView dst, const std::string& path) {
  in.clear();
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size()));
  if (static_cast<std::size_t>(in.gcount()) != dst.size()) fail(ErrorCode::Io, "short read on " + path);
}

// Output goes to a sibling temp file that replaces the target only after
// everything was written.
class AtomicOutput {
 public:
  explicit AtomicOutput(std::string path) : path_(std::move(path)), tmp_(path_ + ".znn-partial") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) fail(ErrorCode::Io, "cannot create " + tmp_);
  }
  ~AtomicOutput() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.flush();
    if (!out_) fail(ErrorCode::Io, "write failed on " + tmp_);
    out_.close();
    std::error_code ec;
    fs::rename(tmp_, path_, ec);
    if (ec) fail(ErrorCode::Io, "cannot rename " + tmp_ + ": " + ec.message());
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

std::string manifest_json(const std::vector<Segment>& segs, std::uint64_t file_size, bool delta) {
  nlohmann::json j;
  j["format"] = "safetensors";
  j["file_size"] = file_size;
  j["delta"] = delta;
  auto& arr = j["segments"] = nlohmann::json::array();
  for (const auto& s : segs)
    arr.push_back({{"name", s.name}, {"dtype", std::string(dtype_name(s.dtype))}, {"offset", s.offset},
                   {"length", s.length}});
  return j.dump();
}

struct Manifest {
  std::uint64_t file_size = 0;
  std::vector<Segment> segments;
};

Manifest parse_manifest(ByteView bytes) {
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    m.file_size = j.at("file_size").get<std::uint64_t>();
    std::uint64_t cursor = 0;
    for (const auto& item : j.at("segments")) {
      Segment s;
      s.name = item.at("name").get<std::string>();
      const auto dtype = dtype_from_name(item.at("dtype").get<std::string>());
      if (!dtype) fail(ErrorCode::CorruptPayload, "manifest: unknown dtype");
      s.dtype = *dtype;
      s.offset = item.at("offset").get<std::uint64_t>();
      s.length = item.at("length").get<std::uint64_t>();
      if (s.offset != cursor) fail(ErrorCode::CorruptPayload, "manifest segments do not tile the file");
      cursor += s.length;
      m.segments.push_back(std::move(s));
    }
    if (cursor != m.file_size) fail(ErrorCode::CorruptPayload, "manifest segments do not cover the file");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptPayload, std::string("manifest: ") + e.what());
  }
  return m;
}

bool use_safetensors(const std::string& path, IngestMode mode) {
  if (mode == IngestMode::Raw) return false;
  if (mode == IngestMode::Safetensors) return true;
  return looks_like_safetensors(path);
}

struct DeltaSource {
  std::string path;
  std::ifstream in;
};

// Shared by standalone and delta compression; `base` is set for deltas.
ModelFileSummary compress_file_impl(std::optional<DeltaSource> base, const std::string& input,
                                    const std::string& output, const CompressConfig& cfg, IngestMode mode) {
  std::ifstream in = open_in(input);
  const std::uint64_t size = file_size_of(input);
  ModelFileSummary summary;
  summary.raw_size = size;
  summary.delta = base.has_value();

  ContainerOptions outer;
  if (base) {
    if (file_size_of(base->path) != size)
      fail(ErrorCode::LengthMismatch, base->path + " and " + input + " differ in size");
    summary.base_digest = sha256_file(base->path);
    outer.base_digest = summary.base_digest;
  }

  Bytes buf;
  auto reader = [&](std::uint64_t start) {
    return [&, start](std::uint64_t offset, MutableByteView dst) {
      read_at(in, start + offset, dst, input);
      if (base) {
        buf.resize(dst.size());
        read_at(base->in, start + offset, buf, base->path);
        xor_into(dst, buf);
      }
    };
  };

  AtomicOutput out(output);
  std::ostream& os = out.stream();
  CompressConfig seg_cfg = cfg;
  if (base) seg_cfg.mode = SelectionMode::DeltaAuto;

  if (!use_safetensors(input, mode)) {
    const std::uint64_t at = static_cast<std::uint64_t>(os.tellp());
    auto r = compress_to(reader(0), size, os, seg_cfg, outer);
    summary.segments.push_back({{"", cfg.dtype, 0, size}, r.header, std::move(r.table), at, r.encoded_size});
  } else {
    const SafetensorsLayout layout = read_safetensors_layout(input);
    const auto segs = plan_segments(layout);
    summary.safetensors = true;
    outer.safetensors = true;

    const std::string manifest = manifest_json(segs, size, summary.delta);
    CompressConfig mcfg;
    mcfg.dtype = DType::opaque();
    mcfg.mode = SelectionMode::ForceStored;
    mcfg.worker_count = cfg.worker_count;
    const Container mc = compress_stream(as_bytes_view(manifest.data(), manifest.size()), mcfg, outer);
    const Bytes mbytes = mc.serialize();
    os.write(reinterpret_cast<const char*>(mbytes.data()), static_cast<std::streamsize>(mbytes.size()));

    const ContainerOptions inner{std::nullopt, true};
    for (const Segment& s : segs) {
      CompressConfig c = seg_cfg;
      c.dtype = s.dtype;
      // The JSON header is kept verbatim in standalone files.
      if (s.offset == 0 && !base) c.mode = SelectionMode::ForceStored;
      const std::uint64_t at = static_cast<std::uint64_t>(os.tellp());
      auto r = compress_to(reader(s.offset), s.length, os, c, inner);
      summary.segments.push_back({s, r.header, std::move(r.table), at, r.encoded_size});
    }
  }
  summary.compressed_size = static_cast<std::uint64_t>(os.tellp());
  out.commit();
  return summary;
}

ContainerHeader peek_header(std::istream& in) {
  const auto pos = in.tellg();
  Bytes head(kDeltaHeaderSize);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  in.clear();
  in.seekg(pos);
  return decode_header(head);
}

void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::CorruptPayload, "trailing bytes after last container");
}

// Decodes a model container file; for deltas every decoded byte is XORed with
// the base at the same file offset.
void decompress_file_impl(const std::string& input, const std::string& output, std::optional<DeltaSource> base,
                          int workers) {
  std::ifstream in = open_in(input);
  const ContainerHeader first = peek_header(in);
  if (first.delta && !base) fail(ErrorCode::InvalidConfig, input + " is a delta container; patch it with a base");
  if (!first.delta && base) fail(ErrorCode::InvalidConfig, input + " is not a delta container");
  if (base) {
    if (sha256_file(base->path) != first.base_digest)
      fail(ErrorCode::BaseDigestMismatch, base->path + " is not the base of " + input);
  }

  AtomicOutput out(output);
  std::uint64_t written = 0;
  Bytes buf;
  const WriteFn sink = [&](ByteView data) {
    if (base) {
      Bytes tmp(data.begin(), data.end());
      buf.resize(tmp.size());
      read_at(base->in, written, buf, base->path);
      xor_into(tmp, buf);
      out.stream().write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(tmp.size()));
    } else {
      out.stream().write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    }
    written += data.size();
  };

  if (!first.safetensors) {
    if (base && file_size_of(base->path) != first.total_size)
      fail(ErrorCode::LengthMismatch, "base size differs from the delta");
    decompress_from(in, sink, workers);
  } else {
    Bytes manifest_bytes;
    decompress_from(in, [&](ByteView d) { manifest_bytes.insert(manifest_bytes.end(), d.begin(), d.end()); }, workers);
    const Manifest m = parse_manifest(manifest_bytes);
    if (base && file_size_of(base->path) != m.file_size) fail(ErrorCode::LengthMismatch, "base size differs from the delta");
    for (const Segment& s : m.segments) {
      const ContainerHeader h = peek_header(in);
      if (h.total_size != s.length || !(h.dtype == s.dtype))
        fail(ErrorCode::CorruptPayload, "segment " + s.name + " does not match the manifest");
      decompress_from(in, sink, workers);
    }
  }
  expect_eof(in);
  out.commit();
}

SegmentSummary read_segment(std::ifstream& in, const std::string& path, Segment seg) {
  SegmentSummary s;
  s.container_offset = static_cast<std::uint64_t>(in.tellg());
  s.header = peek_header(in);
  Bytes table_bytes(s.header.table_size());
  in.seekg(static_cast<std::streamoff>(s.container_offset + s.header.encoded_size()));
  in.read(reinterpret_cast<char*>(table_bytes.data()), static_cast<std::streamsize>(table_bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != table_bytes.size()) fail(ErrorCode::TruncatedPayload, path + ": table truncated");
  s.table = decode_table(table_bytes, s.header.chunk_count * s.header.dtype.group_count);
  validate_table(s.header, s.table);
  const std::uint64_t payload = compute_payload_offsets(s.table, s.header.dtype.group_count).payload_size();
  s.container_size = s.header.encoded_size() + table_bytes.size() + payload + kChecksumSize;
  in.seekg(static_cast<std::streamoff>(s.container_offset + s.container_size));
  if (seg.length == 0 && seg.name.empty()) seg = {"", s.header.dtype, 0, s.header.total_size};
  s.segment = std::move(seg);
  return s;
}

}  // namespace

Sha256Digest sha256_file(const std::string& path) {
  std::ifstream in = open_in(path);
  Sha256 h;
  Bytes buf(1 << 20);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    h.update(ByteView(buf).first(static_cast<std::size_t>(in.gcount())));
  }
  return h.finish();
}

ModelFileSummary compress_model_file(const std::string& input, const std::string& output, const CompressConfig& cfg,
                                     IngestMode mode) {
  return compress_file_impl(std::nullopt, input, output, cfg, mode);
}

ModelFileSummary compress_model_delta(const std::string& base, const std::string& target, const std::string& output,
                                      const CompressConfig& cfg, IngestMode mode) {
  return compress_file_impl(DeltaSource{base, open_in(base)}, target, output, cfg, mode);
}

void decompress_model_file(const std::string& input, const std::string& output, int worker_count) {
  decompress_file_impl(input, output, std::nullopt, worker_count);
}

void patch_model_file(const std::string& base, const std::string& delta, const std::string& output, int worker_count) {
  decompress_file_impl(delta, output, DeltaSource{base, open_in(base)}, worker_count);
}

ModelFileSummary inspect_model_file(const std::string& path) {
  std::ifstream in = open_in(path);
  ModelFileSummary summary;
  summary.compressed_size = file_size_of(path);
  const ContainerHeader first = peek_header(in);
  summary.safetensors = first.safetensors;
  summary.delta = first.delta;
  summary.base_digest = first.base_digest;
  if (!first.safetensors) {
    summary.segments.push_back(read_segment(in, path, {}));
    summary.raw_size = first.total_size;
    return summary;
  }
  const std::uint64_t extent = [&] {
    const SegmentSummary m = read_segment(in, path, {});
    return m.container_size;
  }();
  in.seekg(0);
  Bytes manifest_bytes;
  decompress_from(in, [&](ByteView d) { manifest_bytes.insert(manifest_bytes.end(), d.begin(), d.end()); });
  if (static_cast<std::uint64_t>(in.tellg()) != extent) fail(ErrorCode::CorruptPayload, "manifest extent mismatch");
  const Manifest m = parse_manifest(manifest_bytes);
  summary.raw_size = m.file_size;
  for (const Segment& s : m.segments) summary.segments.push_back(read_segment(in, path, s));
  return summary;
}

}  // namespace znn

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "znn/analysis.hpp"
#include "znn/delta.hpp"
#include "znn/error.hpp"
#include "znn/model_file.hpp"
#include "znn/pipeline.hpp"
#include "znn/safetensors.hpp"

namespace znn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CodecOptions {
  std::string dtype = "opaque";
  std::uint32_t chunk_kb = 256;
  std::string mode = "model";
  int threads = 0;
  bool raw = false;
  bool safetensors = false;
};

void add_codec_options(CLI::App* cmd, CodecOptions& o) {
  cmd->add_option("--dtype", o.dtype, "element type for raw inputs")
      ->check(CLI::IsMember({"fp32", "bf16", "fp16", "opaque"}));
  cmd->add_option("--chunk-kb", o.chunk_kb, "chunk size in KiB")->check(CLI::Range(1u, 4u * 1024u * 1024u));
  cmd->add_option("--mode", o.mode, "method selection")->check(CLI::IsMember({"model", "auto", "huffman", "lz", "stored"}));
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  auto* raw = cmd->add_flag("--raw", o.raw, "treat input as one raw stream even if it parses as safetensors");
  cmd->add_flag("--safetensors", o.safetensors, "require a safetensors input")->excludes(raw);
}

SelectionMode parse_mode(const std::string& m) {
  if (m == "auto") return SelectionMode::DeltaAuto;
  if (m == "huffman") return SelectionMode::ForceHuffman;
  if (m == "lz") return SelectionMode::ForceLz;
  if (m == "stored") return SelectionMode::ForceStored;
  return SelectionMode::Model;
}

CompressConfig make_config(const CodecOptions& o) {
  CompressConfig cfg;
  cfg.dtype = *dtype_from_name(o.dtype);
  if (o.chunk_kb > 0xFFFFFFFFu / 1024u) fail(ErrorCode::InvalidConfig, "chunk size too large");
  cfg.chunk_size = o.chunk_kb * 1024u;
  cfg.mode = parse_mode(o.mode);
  cfg.worker_count = o.threads;
  cfg.validate();
  return cfg;
}

IngestMode ingest_mode(const CodecOptions& o) {
  if (o.raw) return IngestMode::Raw;
  if (o.safetensors) return IngestMode::Safetensors;
  return IngestMode::Auto;
}

Bytes read_all(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = std::move(ss).str();
  return Bytes(s.begin(), s.end());
}

std::string pct1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v);
  return buf;
}

void print_size_line(std::ostream& out, std::uint64_t raw, std::uint64_t compressed) {
  const double p = raw == 0 ? 0.0 : 100.0 * static_cast<double>(compressed) / static_cast<double>(raw);
  out << "compressed size: " << pct1(p) << " (" << raw << " -> " << compressed << " bytes)\n";
}

// --sample middle:N with N in bytes and an optional K/M/G suffix (binary).
std::optional<std::uint64_t> parse_sample(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  const std::string prefix = "middle:";
  if (spec.rfind(prefix, 0) != 0) fail(ErrorCode::InvalidConfig, "sample must look like middle:N");
  std::string num = spec.substr(prefix.size());
  std::uint64_t mult = 1;
  if (!num.empty()) {
    switch (std::toupper(static_cast<unsigned char>(num.back()))) {
      case 'K': mult = 1ull << 10; break;
      case 'M': mult = 1ull << 20; break;
      case 'G': mult = 1ull << 30; break;
      default: break;
    }
    if (mult != 1) num.pop_back();
  }
  std::uint64_t n = 0;
  try {
    std::size_t used = 0;
    n = std::stoull(num, &used);
    if (used != num.size()) throw std::invalid_argument(num);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidConfig, "bad sample size " + spec);
  }
  if (n == 0) fail(ErrorCode::InvalidConfig, "sample size must be positive");
  return n * mult;
}

struct LoadedTensor {
  std::string name;
  DType dtype;
  Bytes data;
};

// Tensors (or one raw stream) clipped to the middle `sample` bytes of the
// data region, element-aligned.
std::vector<LoadedTensor> load_tensors(const std::string& path, const CodecOptions& o, std::optional<std::uint64_t> sample) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  const std::uint64_t size = fs::file_size(path);

  struct Piece {
    std::string name;
    DType dtype;
    std::uint64_t begin, end;
  };
  std::vector<Piece> pieces;
  std::uint64_t region_begin = 0, region_end = size;
  const bool st = ingest_mode(o) != IngestMode::Raw && (o.safetensors || looks_like_safetensors(path));
  if (st) {
    const auto layout = read_safetensors_layout(path);
    region_begin = layout.data_start;
    for (const auto& s : layout.spans) pieces.push_back({s.name, s.dtype, layout.data_start + s.begin, layout.data_start + s.end});
  } else {
    pieces.push_back({fs::path(path).filename().string(), *dtype_from_name(o.dtype), 0, size});
  }
  if (sample && *sample < region_end - region_begin) {
    const std::uint64_t mid = region_begin + (region_end - region_begin - *sample) / 2;
    region_begin = mid;
    region_end = mid + *sample;
  }

  std::vector<LoadedTensor> out;
  for (const auto& p : pieces) {
    const std::uint64_t eb = p.dtype.element_bytes;
    std::uint64_t b = std::max(p.begin, region_begin);
    std::uint64_t e = std::min(p.end, region_end);
    if (b >= e) continue;
    b = p.begin + (b - p.begin + eb - 1) / eb * eb;
    e = p.begin + (e - p.begin) / eb * eb;
    if (b >= e) continue;
    LoadedTensor t{p.name, p.dtype, Bytes(e - b)};
    in.seekg(static_cast<std::streamoff>(b));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != t.data.size()) fail(ErrorCode::Io, "short read on " + path);
    out.push_back(std::move(t));
  }
  return out;
}

json header_json(const ContainerHeader& h) {
  json j{{"dtype", std::string(dtype_name(h.dtype))},
         {"group_count", h.dtype.group_count},
         {"chunk_size", h.chunk_size},
         {"total_size", h.total_size},
         {"chunk_count", h.chunk_count},
         {"delta", h.delta},
         {"safetensors", h.safetensors},
         {"lz_backend", h.lz_backend}};
  if (h.delta) j["base_digest"] = to_hex(h.base_digest);
  return j;
}

int cmd_compress(const std::string& input, const std::string& output, const CodecOptions& o, bool as_json,
                 std::ostream& out) {
  const CompressConfig cfg = make_config(o);
  std::uint64_t raw = 0, compressed = 0;
  if (input == "-" || output == "-") {
    if (o.safetensors) fail(ErrorCode::InvalidConfig, "stdin/stdout streaming supports raw mode only");
    Bytes data;
    if (input == "-") {
      data = read_all(std::cin);
    } else {
      std::ifstream in(input, std::ios::binary);
      if (!in) fail(ErrorCode::Io, "cannot open " + input);
      data = read_all(in);
    }
    const Bytes bytes = compress_stream(data, cfg).serialize();
    raw = data.size();
    compressed = bytes.size();
    if (output == "-") {
      std::cout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      std::cout.flush();
      return kOk;  // stdout carries the container, not the report
    }
    std::ofstream f(output, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorCode::Io, "write failed on " + output);
  } else {
    const auto s = compress_model_file(input, output, cfg, ingest_mode(o));
    raw = s.raw_size;
    compressed = s.compressed_size;
  }
  if (as_json) {
    out << json{{"raw_bytes", raw}, {"compressed_bytes", compressed},
                {"compressed_pct", raw == 0 ? 0.0 : 100.0 * static_cast<double>(compressed) / static_cast<double>(raw)}}
               .dump(2)
        << "\n";
  } else {
    print_size_line(out, raw, compressed);
  }
  return kOk;
}

int cmd_decompress(const std::string& input, const std::string& output, int threads) {
  if (input == "-" || output == "-") {
    Bytes data;
    if (input == "-") {
      data = read_all(std::cin);
    } else {
      std::ifstream in(input, std::ios::binary);
      if (!in) fail(ErrorCode::Io, "cannot open " + input);
      data = read_all(in);
    }
    const Container c = Container::parse(data);
    if (c.header.safetensors) fail(ErrorCode::InvalidConfig, "stdin/stdout streaming supports raw containers only");
    if (c.header.delta) fail(ErrorCode::InvalidConfig, "delta containers need `patch --base`");
    const Bytes raw = decompress_stream(c, threads);
    if (output == "-") {
      std::cout.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      std::cout.flush();
    } else {
      std::ofstream f(output, std::ios::binary);
      f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!f) fail(ErrorCode::Io, "write failed on " + output);
    }
    return kOk;
  }
  decompress_model_file(input, output, threads);
  return kOk;
}

int cmd_inspect(const std::string& input, bool as_json, std::ostream& out) {
  const ModelFileSummary s = inspect_model_file(input);
  std::map<std::string, std::uint64_t> methods;
  json segments = json::array();
  for (const auto& seg : s.segments) {
    std::map<std::string, std::uint64_t> seg_methods;
    for (const auto& r : seg.table) {
      ++methods[std::string(method_name(r.method))];
      ++seg_methods[std::string(method_name(r.method))];
    }
    json j = header_json(seg.header);
    j["name"] = seg.segment.name;
    j["offset"] = seg.segment.offset;
    j["container_offset"] = seg.container_offset;
    j["container_size"] = seg.container_size;
    j["methods"] = seg_methods;
    segments.push_back(std::move(j));
  }
  json j{{"safetensors", s.safetensors},
         {"delta", s.delta},
         {"raw_bytes", s.raw_size},
         {"compressed_bytes", s.compressed_size},
         {"total_pct", s.compressed_pct()},
         {"methods", methods},
         {"containers", segments}};
  if (s.delta) j["base_digest"] = to_hex(s.base_digest);
  if (as_json) {
    out << j.dump(2) << "\n";
    return kOk;
  }
  out << input << ": " << (s.safetensors ? "safetensors" : "raw") << (s.delta ? " delta" : "") << " container, "
      << s.segments.size() << " segment(s)\n";
  for (const auto& seg : s.segments) {
    out << "  " << (seg.segment.name.empty() ? "(stream)" : seg.segment.name) << ": " << dtype_name(seg.header.dtype)
        << ", " << seg.header.total_size << " bytes, " << seg.header.chunk_count << " chunk(s) of "
        << seg.header.chunk_size << "\n";
  }
  out << "  methods:";
  for (const auto& [name, count] : methods) out << " " << name << "=" << count;
  out << "\n";
  print_size_line(out, s.raw_size, s.compressed_size);
  return kOk;
}

int cmd_hist(const std::string& input, const CodecOptions& o, const std::string& sample, bool as_json, std::ostream& out) {
  const auto tensors = load_tensors(input, o, parse_sample(sample));
  std::map<std::string, std::pair<std::array<std::uint64_t, 256>, std::uint64_t>> per_dtype;
  for (const auto& t : tensors) {
    if (!t.dtype.is_float()) continue;
    auto& [counts, elements] = per_dtype[std::string(dtype_name(t.dtype))];
    const auto h = exponent_histogram(t.data, t.dtype);
    for (std::size_t v = 0; v < 256; ++v) counts[v] += h[v];
    elements += t.data.size() / t.dtype.element_bytes;
  }
  if (per_dtype.empty()) fail(ErrorCode::OpaqueUnsupported, "no floating-point data to histogram (set --dtype for raw files)");
  json j = json::object();
  for (const auto& [name, entry] : per_dtype) {
    const auto& [counts, elements] = entry;
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.rbegin(), sorted.rend());
    std::uint64_t top12 = 0;
    for (std::size_t i = 0; i < 12; ++i) top12 += sorted[i];
    json bins = json::object();
    std::size_t nonzero = 0;
    for (std::size_t v = 0; v < 256; ++v)
      if (counts[v]) {
        bins[std::to_string(v)] = counts[v];
        ++nonzero;
      }
    const double top12_pct = elements ? 100.0 * static_cast<double>(top12) / static_cast<double>(elements) : 0.0;
    j[name] = {{"elements", elements}, {"nonzero_bins", nonzero}, {"top12_pct", top12_pct}, {"counts", bins}};
    if (!as_json) {
      out << name << ": " << elements << " elements, " << nonzero << " distinct exponents, top 12 cover " << pct1(top12_pct)
          << "\n";
      for (std::size_t v = 0; v < 256; ++v)
        if (counts[v])
          out << "  " << v << "\t" << counts[v] << "\t"
              << pct1(100.0 * static_cast<double>(counts[v]) / static_cast<double>(elements)) << "\n";
    }
  }
  if (as_json) out << j.dump(2) << "\n";
  return kOk;
}

int cmd_report(const std::string& input, const CodecOptions& o, const std::string& sample, bool as_json,
               std::ostream& out) {
  const CompressConfig cfg = make_config(o);
  const auto tensors = load_tensors(input, o, parse_sample(sample));
  ModelReport total;
  for (const auto& t : tensors) {
    const TensorInput ti{t.name, t.dtype, t.data};
    auto r = model_report(std::span(&ti, 1), cfg);
    total.tensors.push_back(std::move(r.tensors.front()));
    total.raw_bytes += r.raw_bytes;
    total.compressed_bytes += r.compressed_bytes;
  }
  total.total_pct = total.raw_bytes ? 100.0 * static_cast<double>(total.compressed_bytes) / static_cast<double>(total.raw_bytes) : 0.0;
  out << (as_json ? total.to_json() + "\n" : total.to_table());
  return kOk;
}

int cmd_plan(std::uint64_t n, std::uint64_t period, const std::string& mode, std::ostream& out) {
  const auto s = plan_bases(n, period, mode == "chain" ? ScheduleMode::Chain : ScheduleMode::FixedBase);
  out << s.to_json() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"znn: lossless compression for neural-network weight files", "znn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CodecOptions codec;
  std::string input, output, base, sample;
  bool as_json = false;

  auto* compress = app.add_subcommand("compress", "compress a model file (safetensors-aware) or raw stream");
  compress->add_option("input", input, "input file or - for stdin")->required();
  compress->add_option("-o,--output", output, "output .znn file or - for stdout")->required();
  compress->add_flag("--json", as_json, "machine-readable summary");
  add_codec_options(compress, codec);

  int threads = 0;
  auto* decompress = app.add_subcommand("decompress", "restore the original file");
  decompress->add_option("input", input)->required();
  decompress->add_option("-o,--output", output)->required();
  decompress->add_option("--threads", threads)->check(CLI::NonNegativeNumber);

  auto* delta = app.add_subcommand("delta", "compress the XOR of a target against a base");
  delta->add_option("--base", base, "base model file")->required();
  delta->add_option("target", input)->required();
  delta->add_option("-o,--output", output)->required();
  delta->add_flag("--json", as_json);
  add_codec_options(delta, codec);

  auto* patch = app.add_subcommand("patch", "apply a delta container to its base");
  patch->add_option("--base", base)->required();
  patch->add_option("delta", input)->required();
  patch->add_option("-o,--output", output)->required();
  patch->add_option("--threads", threads)->check(CLI::NonNegativeNumber);

  auto* inspect = app.add_subcommand("inspect", "show container headers and method statistics");
  inspect->add_option("input", input)->required();
  inspect->add_flag("--json", as_json);

  auto* hist = app.add_subcommand("hist", "exponent histogram of a model file");
  hist->add_option("input", input)->required();
  hist->add_option("--sample", sample, "middle:N[K|M|G]");
  hist->add_flag("--json", as_json);
  add_codec_options(hist, codec);

  auto* report = app.add_subcommand("report", "per-tensor compressed size with byte-group breakdown");
  report->add_option("input", input)->required();
  report->add_option("--sample", sample, "middle:N[K|M|G]");
  report->add_flag("--json", as_json);
  add_codec_options(report, codec);

  std::uint64_t checkpoints = 0, period = 10;
  std::string plan_mode = "chain";
  auto* plan = app.add_subcommand("plan", "periodic-base schedule for a checkpoint series (JSON)");
  plan->add_option("--checkpoints", checkpoints)->required();
  plan->add_option("--period", period);
  plan->add_option("--mode", plan_mode)->check(CLI::IsMember({"chain", "fixed_base"}));

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "znn: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*compress) return cmd_compress(input, output, codec, as_json, out);
    if (*decompress) return cmd_decompress(input, output, threads);
    if (*delta) {
      CompressConfig cfg = make_config(codec);
      const auto s = compress_model_delta(base, input, output, cfg, ingest_mode(codec));
      if (as_json)
        out << json{{"raw_bytes", s.raw_size}, {"compressed_bytes", s.compressed_size}, {"compressed_pct", s.compressed_pct()}}
                   .dump(2)
            << "\n";
      else
        print_size_line(out, s.raw_size, s.compressed_size);
      return kOk;
    }
    if (*patch) {
      patch_model_file(base, input, output, threads);
      return kOk;
    }
    if (*inspect) return cmd_inspect(input, as_json, out);
    if (*hist) return cmd_hist(input, codec, sample, as_json, out);
    if (*report) return cmd_report(input, codec, sample, as_json, out);
    if (*plan) return cmd_plan(checkpoints, period, plan_mode, out);
  } catch (const Error& e) {
    err << "znn: " << e.what() << "\n";
    switch (error_kind(e.code())) {
      case ErrorKind::Usage: return kUsage;
      case ErrorKind::Io: return kIo;
      case ErrorKind::Data: return kData;
    }
  } catch (const fs::filesystem_error& e) {
    err << "znn: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "znn: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace znn::cli

#pragma once

// Whole-file compression. Raw files become a single container. Safetensors
// files become a manifest container (STORED JSON listing the byte segments
// of the original file) followed by one container per segment: the
// length-prefixed JSON header, each tensor compressed with its own dtype,
// and any bytes between or after tensors as opaque segments. Chunking
// restarts at every segment boundary.

#include <cstdint>
#include <string>
#include <vector>

#include "znn/format.hpp"
#include "znn/pipeline.hpp"
#include "znn/safetensors.hpp"

namespace znn {

enum class IngestMode { Auto, Raw, Safetensors };

struct Segment {
  std::string name;
  DType dtype;
  std::uint64_t offset = 0;  // in the original file
  std::uint64_t length = 0;
};

// Header prefix, tensors in file order, and opaque fillers for any
// uncovered bytes. Segments tile [0, file_size) exactly.
std::vector<Segment> plan_segments(const SafetensorsLayout& layout);

struct SegmentSummary {
  Segment segment;
  ContainerHeader header;
  std::vector<ChunkGroupRecord> table;
  std::uint64_t container_offset = 0;
  std::uint64_t container_size = 0;
};

struct ModelFileSummary {
  bool safetensors = false;
  bool delta = false;
  Sha256Digest base_digest{};
  std::uint64_t raw_size = 0;
  std::uint64_t compressed_size = 0;
  std::vector<SegmentSummary> segments;  // one entry for raw containers

  double compressed_pct() const {
    return raw_size == 0 ? 0.0 : 100.0 * static_cast<double>(compressed_size) / static_cast<double>(raw_size);
  }
};

// For safetensors inputs cfg.dtype is ignored; in raw mode it applies to the
// whole file.
ModelFileSummary compress_model_file(const std::string& input, const std::string& output, const CompressConfig& cfg,
                                     IngestMode mode = IngestMode::Auto);
ModelFileSummary compress_model_delta(const std::string& base, const std::string& target, const std::string& output,
                                      const CompressConfig& cfg, IngestMode mode = IngestMode::Auto);

void decompress_model_file(const std::string& input, const std::string& output, int worker_count = 0);
void patch_model_file(const std::string& base, const std::string& delta, const std::string& output,
                      int worker_count = 0);

// Reads headers and chunk tables only.
ModelFileSummary inspect_model_file(const std::string& path);

Sha256Digest sha256_file(const std::string& path);

}  // namespace znn

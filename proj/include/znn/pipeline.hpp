#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "znn/bytes.hpp"
#include "znn/digest.hpp"
#include "znn/dtype.hpp"
#include "znn/entropy.hpp"
#include "znn/format.hpp"

namespace znn {

struct CompressConfig {
  DType dtype = DType::opaque();
  std::uint32_t chunk_size = kDefaultChunkSize;
  SelectionMode mode = SelectionMode::Model;
  std::uint32_t skip_window = 15;
  double incompressible_threshold = 0.98;
  int worker_count = 0;  // 0: OpenMP default

  void validate() const;
};

enum class ProbeDecision { Probe, StoreRaw };

// Per byte-group skip counters. After a probe finds a group incompressible,
// that group is stored raw for the next `skip_window` chunks.
class GroupProbeState {
 public:
  GroupProbeState(std::size_t group_count, std::uint32_t skip_window)
      : remaining_(group_count, 0), last_incompressible_(group_count, false), skip_window_(skip_window) {}

  ProbeDecision decide(std::size_t group);
  void record(std::size_t group, bool incompressible);

  std::uint32_t remaining_skips(std::size_t group) const { return remaining_[group]; }
  bool last_probe_incompressible(std::size_t group) const { return last_incompressible_[group]; }
  std::uint32_t skip_window() const { return skip_window_; }

 private:
  std::vector<std::uint32_t> remaining_;
  std::vector<bool> last_incompressible_;
  std::uint32_t skip_window_;
};

inline ProbeDecision probe_or_skip(GroupProbeState& state, std::size_t group) { return state.decide(group); }

// True when the group never enters the skip state (the exponent stream of
// float dtypes).
inline bool always_probed(DType dtype, std::size_t group) { return dtype.is_float() && group == 0; }

struct EncodedChunk {
  std::vector<ChunkGroupRecord> records;
  Bytes payload;  // group payloads, concatenated in group order
};

// Stateful chunk encoder. Feed consecutive chunk-aligned batches; probe
// decisions carry across batches in chunk order, so output does not depend
// on batch size or worker count.
class ChunkEncoder {
 public:
  explicit ChunkEncoder(const CompressConfig& cfg);

  // `data` holds whole chunks (the last one may be short only if it is the
  // final batch).
  std::vector<EncodedChunk> encode_batch(ByteView data);

  const CompressConfig& config() const { return cfg_; }

 private:
  CompressConfig cfg_;
  GroupProbeState probes_;
};

// Header fields beyond geometry.
struct ContainerOptions {
  std::optional<Sha256Digest> base_digest;  // set => delta container
  bool safetensors = false;
};

Container compress_stream(ByteView input, const CompressConfig& cfg, const ContainerOptions& options = {});

// Verifies the checksum, then decodes all chunks in parallel.
Bytes decompress_stream(const Container& c, int worker_count = 0);
// Decodes one chunk using only the header and table.
Bytes decompress_chunk(const Container& c, std::uint64_t chunk);
void decode_chunk_into(const ContainerHeader& h, std::span<const ChunkGroupRecord> records, ByteView chunk_payload,
                       MutableByteView out);

// Streaming variants with working memory bounded by the batch size.
using ReadFn = std::function<void(std::uint64_t offset, MutableByteView dst)>;
using WriteFn = std::function<void(ByteView data)>;

struct StreamResult {
  ContainerHeader header;
  std::vector<ChunkGroupRecord> table;
  std::uint64_t encoded_size = 0;
};

// Reads `total_size` bytes through `read` and writes a container to `out`,
// which must be seekable (the chunk table is back-filled).
StreamResult compress_to(const ReadFn& read, std::uint64_t total_size, std::ostream& out, const CompressConfig& cfg,
                         const ContainerOptions& options = {});

// Reads one container from `in` (positioned at its header) and writes the
// decoded bytes in order. Throws CHECKSUM_MISMATCH after the last chunk if the
// payload does not verify.
ContainerHeader decompress_from(std::istream& in, const WriteFn& write, int worker_count = 0);

std::size_t batch_chunks(int worker_count);

namespace reference {
// Single-threaded chunk-by-chunk implementation with no batching; the
// parallel paths must match it byte for byte.
Container compress_stream_serial(ByteView input, const CompressConfig& cfg, const ContainerOptions& options = {});
Bytes decompress_stream_serial(const Container& c);
}  // namespace reference

}  // namespace znn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "znn/bytes.hpp"
#include "znn/pipeline.hpp"

namespace znn {

Bytes xor_bytes(ByteView a, ByteView b);
// out ^= other, in place.
void xor_into(MutableByteView out, ByteView other);

namespace reference {
Bytes xor_bytes_serial(ByteView a, ByteView b);
}

// Container of xor(base, target), compressed with DELTA_AUTO selection and
// bound to the base by its SHA-256. cfg.mode is overridden.
Container compress_delta(ByteView base, ByteView target, const CompressConfig& cfg);
// Checks the base digest before touching the payload.
Bytes apply_delta(ByteView base, const Container& delta, int worker_count = 0);

enum class ScheduleMode { Chain, FixedBase };

struct ScheduleEntry {
  std::uint64_t index = 0;
  bool full = true;
  std::uint64_t base = 0;  // meaningful when !full

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

struct BaseSchedule {
  std::vector<ScheduleEntry> entries;
  std::uint64_t period = 1;
  ScheduleMode mode = ScheduleMode::Chain;

  // Checkpoints to load, starting from a full one, to rebuild `index`.
  std::vector<std::uint64_t> recovery_path(std::uint64_t index) const;
  std::uint64_t longest_chain() const;

  std::string to_json() const;
  static BaseSchedule from_json(const std::string& text);
};

BaseSchedule plan_bases(std::uint64_t n_checkpoints, std::uint64_t period, ScheduleMode mode);

}  // namespace znn

#include "znn/delta.hpp"

#include <algorithm>
#include "json.hpp"

#include "znn/error.hpp"

namespace znn {

void xor_into(MutableByteView out, ByteView other) {
  if (out.size() != other.size())
    fail(ErrorCode::LengthMismatch, std::to_string(out.size()) + " vs " + std::to_string(other.size()) + " bytes");
  std::uint8_t* o = out.data();
  const std::uint8_t* b = other.data();
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for simd schedule(static) if (n > (1 << 22))
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] ^= b[i];
}

Bytes xor_bytes(ByteView a, ByteView b) {
  if (a.size() != b.size())
    fail(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " bytes");
  Bytes out(a.begin(), a.end());
  xor_into(out, b);
  return out;
}

namespace reference {
Bytes xor_bytes_serial(ByteView a, ByteView b) {
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "xor of unequal lengths");
  Bytes out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}
}  // namespace reference

Container compress_delta(ByteView base, ByteView target, const CompressConfig& cfg) {
  if (base.size() != target.size())
    fail(ErrorCode::LengthMismatch, "base has " + std::to_string(base.size()) + " bytes, target " +
                                        std::to_string(target.size()));
  CompressConfig delta_cfg = cfg;
  delta_cfg.mode = SelectionMode::DeltaAuto;
  const Bytes diff = xor_bytes(base, target);
  return compress_stream(diff, delta_cfg, ContainerOptions{sha256(base), false});
}

Bytes apply_delta(ByteView base, const Container& delta, int worker_count) {
  if (!delta.header.delta) fail(ErrorCode::InvalidHeader, "container is not a delta");
  if (sha256(base) != delta.header.base_digest) fail(ErrorCode::BaseDigestMismatch, "base does not match the delta");
  if (base.size() != delta.header.total_size) fail(ErrorCode::LengthMismatch, "base size differs from delta size");
  Bytes out = decompress_stream(delta, worker_count);
  xor_into(out, base);
  return out;
}

BaseSchedule plan_bases(std::uint64_t n_checkpoints, std::uint64_t period, ScheduleMode mode) {
  if (period == 0) fail(ErrorCode::InvalidPeriod, "period must be at least 1");
  if (n_checkpoints == 0) fail(ErrorCode::InvalidPeriod, "need at least one checkpoint");
  BaseSchedule s;
  s.period = period;
  s.mode = mode;
  s.entries.reserve(n_checkpoints);
  for (std::uint64_t i = 0; i < n_checkpoints; ++i) {
    ScheduleEntry e{i, i % period == 0, 0};
    if (!e.full) e.base = mode == ScheduleMode::Chain ? i - 1 : i - i % period;
    s.entries.push_back(e);
  }
  return s;
}

std::vector<std::uint64_t> BaseSchedule::recovery_path(std::uint64_t index) const {
  if (index >= entries.size()) fail(ErrorCode::InvalidConfig, "checkpoint index out of range");
  std::vector<std::uint64_t> path{index};
  while (!entries[path.back()].full) {
    const std::uint64_t base = entries[path.back()].base;
    if (base >= path.back()) fail(ErrorCode::InvalidConfig, "schedule references a later checkpoint");
    path.push_back(base);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::uint64_t BaseSchedule::longest_chain() const {
  std::uint64_t longest = 0;
  for (const auto& e : entries) longest = std::max<std::uint64_t>(longest, recovery_path(e.index).size() - 1);
  return longest;
}

std::string BaseSchedule::to_json() const {
  nlohmann::json j;
  j["period"] = period;
  j["mode"] = mode == ScheduleMode::Chain ? "chain" : "fixed_base";
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json item{{"index", e.index}, {"storage", e.full ? "full" : "delta"}};
    if (!e.full) item["base"] = e.base;
    arr.push_back(std::move(item));
  }
  return j.dump(2);
}

BaseSchedule BaseSchedule::from_json(const std::string& text) {
  BaseSchedule s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.period = j.at("period").get<std::uint64_t>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "chain")
      s.mode = ScheduleMode::Chain;
    else if (mode == "fixed_base")
      s.mode = ScheduleMode::FixedBase;
    else
      fail(ErrorCode::InvalidConfig, "unknown schedule mode " + mode);
    for (const auto& item : j.at("entries")) {
      ScheduleEntry e;
      e.index = item.at("index").get<std::uint64_t>();
      e.full = item.at("storage").get<std::string>() == "full";
      if (!e.full) e.base = item.at("base").get<std::uint64_t>();
      s.entries.push_back(e);
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::InvalidConfig, std::string("schedule json: ") + ex.what());
  }
  return s;
}

}  // namespace znn

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fixwal/bytes.hpp"
#include "fixwal/crypto.hpp"
#include "fixwal/record.hpp"
#include "fixwal/wal.hpp"

namespace fixwal::test {

inline Bytes random_payload(std::mt19937_64& rng, std::size_t len) {
  Bytes out(len);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

inline Bytes padded(Bytes p) {
  p.resize(round_up(p.size(), 4), 0);
  return p;
}

inline ReplicaKey fixed_key(std::uint8_t fill = 7) {
  ReplicaKey k;
  k.key_id = "test";
  k.material.fill(fill);
  return k;
}

inline EngineOptions slot_options(std::size_t capacity) {
  EngineOptions o;
  o.slot_capacity = capacity;
  return o;
}

// Keeps every persisted slot in memory.
class RecordingBackend : public DurabilityBackend {
 public:
  void persist(ByteView slot_bytes, std::uint32_t ssn) override {
    if (fail_next) {
      fail_next = false;
      throw std::runtime_error("injected");
    }
    flushes.emplace_back(slot_bytes.begin(), slot_bytes.end());
    ssns.push_back(ssn);
    offset += slot_bytes.size();
  }
  Lsn position() const override { return {fid, offset}; }
  std::uint64_t next_checkpoint_id() const override { return last_ckpt + 1; }
  void commit_checkpoint(const CheckpointMarker& marker) override {
    last_ckpt = marker.ckpt_id;
    markers.push_back(marker);
    ++fid;
    offset = 0;
  }
  std::vector<LogRecord> recover() override {
    Bytes all;
    for (const auto& f : flushes) append_bytes(all, f);
    return parse_records(all);
  }

  std::vector<Bytes> flushes;
  std::vector<std::uint32_t> ssns;
  std::vector<CheckpointMarker> markers;
  std::uint32_t fid = 1;
  std::uint64_t offset = 0;
  std::uint64_t last_ckpt = 0;
  bool fail_next = false;
};

}  // namespace fixwal::test

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "fixwal/record.hpp"

namespace fixwal {

inline constexpr std::size_t kDefaultSlotCapacity = 128 * 1024;
inline constexpr std::chrono::milliseconds kDefaultFlushInterval{100};

struct CheckpointMarker {
  std::uint64_t ckpt_id = 0;
  Lsn lsn;  // storage position of the checkpoint record

  bool operator==(const CheckpointMarker&) const = default;
};

struct FlushReceipt {
  std::uint32_t ssn = 0;
  std::size_t byte_count = 0;
};

struct AppendResult {
  Lsn lsn;
  bool flushed = false;
};

// Where a flushed slot goes. persist() returns only once the bytes are durable.
class DurabilityBackend {
 public:
  virtual ~DurabilityBackend() = default;

  virtual void persist(ByteView slot_bytes, std::uint32_t ssn) = 0;
  // Storage position the next persisted slot will start at.
  virtual Lsn position() const = 0;
  virtual std::uint64_t next_checkpoint_id() const = 0;
  virtual void commit_checkpoint(const CheckpointMarker& marker) = 0;
  virtual std::vector<LogRecord> recover() = 0;
};

// In-memory buffer of encoded records awaiting a flush. Appends are
// linearizable; one flush runs at a time and drains the whole buffer.
class Slot {
 public:
  explicit Slot(std::size_t capacity = kDefaultSlotCapacity, std::uint32_t first_ssn = 0);

  AppendResult append(ByteView record, bool full_sync, DurabilityBackend& backend);
  FlushReceipt flush(DurabilityBackend& backend);

  std::size_t capacity() const { return capacity_; }
  std::size_t buffered() const;
  std::uint32_t next_ssn() const;
  std::chrono::steady_clock::time_point created_at() const;

 private:
  FlushReceipt flush_locked(DurabilityBackend& backend);
  Lsn next_lsn_locked(const DurabilityBackend& backend, std::size_t len);

  std::size_t capacity_;
  mutable std::mutex mu_;
  Bytes buffer_;
  std::uint32_t ssn_;
  std::chrono::steady_clock::time_point created_at_;
  std::uint32_t lsn_file_ = 0;
  std::uint64_t lsn_offset_ = 0;
};

struct FlushPolicy {
  std::chrono::milliseconds interval = kDefaultFlushInterval;
};

struct EngineOptions {
  std::size_t slot_capacity = kDefaultSlotCapacity;
  FlushPolicy flush_policy;
  bool periodic_flush = false;
};

// Client-facing log: encodes payloads into records, buffers them in the slot
// and drives flushes (per full-sync write, when full, and periodically).
class WalEngine {
 public:
  WalEngine(DurabilityBackend& backend, EngineOptions options = {});
  ~WalEngine();

  WalEngine(const WalEngine&) = delete;
  WalEngine& operator=(const WalEngine&) = delete;

  AppendResult append(ByteView payload, bool full_sync = false);
  FlushReceipt flush();
  CheckpointMarker checkpoint();

  void start_periodic_flush();
  void stop_periodic_flush();

  Slot& slot() { return slot_; }
  DurabilityBackend& backend() { return backend_; }

 private:
  void rethrow_background_error();

  DurabilityBackend& backend_;
  EngineOptions options_;
  Slot slot_;
  std::mutex checkpoint_mu_;

  std::mutex flusher_mu_;
  std::condition_variable flusher_cv_;
  bool stop_flusher_ = false;
  std::thread flusher_;
  std::exception_ptr background_error_;
};

}  // namespace fixwal

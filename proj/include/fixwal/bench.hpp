#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fixwal/journal.hpp"
#include "fixwal/quorum_backend.hpp"
#include "fixwal/storage.hpp"
#include "fixwal/wal.hpp"
#include "fixwal/workload.hpp"

namespace fixwal {

enum class BackendKind { kJournal, kQuorum };

struct BenchConfig {
  BackendKind backend = BackendKind::kJournal;
  JournalMode journal_mode = JournalMode::kSegmented;
  std::size_t segment_size = kDefaultSegmentSize;
  std::size_t slot_capacity = kDefaultSlotCapacity;
  std::chrono::milliseconds flush_interval = kDefaultFlushInterval;
  // Concurrent runs only; disabling it makes single-worker byte counts
  // independent of timing.
  bool periodic_flush = true;

  // Quorum backend.
  SelectionScheme selection = SelectionScheme::kVnos;
  std::size_t replicas = 30;
  std::size_t max_write_size = 1024;

  DeviceModel device;
  // Client-side pause between operations of one worker.
  std::chrono::microseconds think_time{0};
  // Concurrent runs stop at this deadline when non-zero, otherwise after
  // op_count operations in total.
  std::chrono::milliseconds duration{0};
  bool parallel_crypto = true;
  std::uint64_t seed = 1;

  // Throws InvalidConfig / InvalidSegmentSize.
  void validate() const;
};

std::string backend_name(BackendKind kind);
std::string journal_mode_name(JournalMode mode);
std::string selection_name(SelectionScheme scheme);

struct LatencySummary {
  std::size_t samples = 0;
  double mean_us = 0;
  double p50_us = 0;
  double p95_us = 0;
  double p99_us = 0;
  double max_us = 0;
};

// Nearest-rank percentiles.
LatencySummary summarize_latencies(std::vector<double> micros);

struct BenchReport {
  std::string driver;  // "sequential", "concurrent" or "recovery"
  BenchConfig config;
  std::string workload;
  std::size_t workers = 1;
  std::size_t ops = 0;
  double elapsed_s = 0;
  double throughput_ops = 0;
  LatencySummary latency;

  // Bytes that reached the log's storage, IV framing included.
  std::uint64_t bytes_written_actual = 0;
  // The same minus the per-unit IV framing.
  std::uint64_t bytes_written_padded = 0;
  std::uint64_t framing_bytes = 0;
  // Plaintext record bytes an unpadded writer would have produced.
  std::uint64_t bytes_written_baseline = 0;
  double relative_cost = 0;  // padded / baseline
  std::uint64_t write_count = 0;
  std::map<std::size_t, std::uint64_t> write_sizes;

  std::optional<double> recovery_time_ms;
  std::optional<std::size_t> recovered_records;

  bool partial = false;
  std::string error;
};

// Owns one instrumented log stack: storage shim, backend and engine.
class BenchHarness {
 public:
  explicit BenchHarness(BenchConfig config, ReplicaKey key = {});
  ~BenchHarness();

  BenchHarness(const BenchHarness&) = delete;
  BenchHarness& operator=(const BenchHarness&) = delete;

  WalEngine& engine() { return *engine_; }
  DurabilityBackend& backend();
  ObservedStorage& storage() { return *observed_; }
  MemoryStorage& raw_storage() { return memory_; }
  InProcessBus* bus() { return bus_.get(); }
  const BenchConfig& config() const { return config_; }
  const ReplicaKey& key() const { return key_; }

  // Drops volatile state: the slot, unsynced bytes and, for the quorum
  // backend, one replica per group.
  void crash();
  // Recovers from what survived, as a restarted client would.
  std::vector<LogRecord> recover();

  // Byte accounting of the log since construction.
  void account(BenchReport& report) const;
  // Records passed to the engine; the baseline for relative cost.
  void note_record(std::size_t payload_len);

 private:
  void build_engine();

  BenchConfig config_;
  ReplicaKey key_;
  MemoryStorage memory_;
  std::unique_ptr<ObservedStorage> observed_;
  std::unique_ptr<JournalBackend> journal_;
  std::unique_ptr<InProcessBus> bus_;
  std::unique_ptr<Registry> registry_;
  std::unique_ptr<LogicalClock> clock_;
  std::unique_ptr<QuorumBackend> quorum_;
  std::unique_ptr<WalEngine> engine_;
  std::atomic<std::uint64_t> baseline_bytes_{0};
  std::atomic<std::uint64_t> real_unit_messages_{0};
  std::atomic<std::uint64_t> fake_unit_messages_{0};
  std::atomic<std::uint64_t> unit_message_bytes_{0};
  bool crashed_ = false;
};

// Every write is a full-sync write and therefore its own flush.
BenchReport run_sequential(const WorkloadSpec& spec, BenchHarness& harness);
// Writers append without full sync; the periodic flusher makes them durable.
BenchReport run_concurrent(const WorkloadSpec& spec, BenchHarness& harness, std::size_t workers);
// One fresh harness per concurrency level.
std::vector<BenchReport> run_concurrency_sweep(const WorkloadSpec& spec, const BenchConfig& config,
                                               const std::vector<std::size_t>& levels);
// First level after which adding workers buys less than half the ideal
// speed-up; the last level when throughput never stops scaling.
std::size_t saturation_level(const std::vector<BenchReport>& sweep);

// Sum of ceil(L/S)*S over sum of L. Throws NoData on an empty list.
double relative_cost(const std::vector<std::size_t>& write_sizes, std::size_t segment_size);
// n * slot_capacity over sum of L. Throws NoData on an empty list.
double naive_cost(const std::vector<std::size_t>& write_sizes, std::size_t slot_capacity);

struct RecoveryMeasurement {
  double recovery_time_ms = 0;
  std::size_t committed_records = 0;
  std::size_t recovered_records = 0;
  std::uint64_t committed_bytes = 0;  // record bytes since the checkpoint
  std::uint64_t log_bytes = 0;        // stored bytes recovery had to read
  bool prefix_matches = false;
};

// Writes records until `crash_point` record bytes are committed, leaves a few
// more buffered but unflushed, crashes, and times recovery. Writing happens
// with the device model disabled; recovery runs under it.
RecoveryMeasurement measure_recovery(const WorkloadSpec& spec, BenchHarness& harness,
                                     std::uint64_t crash_point);

// Report serialization.
std::string report_json(const BenchReport& report, int indent = 2);
std::string reports_json(const std::vector<BenchReport>& reports, int indent = 2);
void write_reports_csv(std::ostream& out, const std::vector<BenchReport>& reports);
// gnuplot-friendly: workers, throughput, p50, p95, p99.
void write_curve_tsv(std::ostream& out, const std::vector<BenchReport>& reports);
// Relative cost of one workload for a range of segment sizes.
void write_rc_tsv(std::ostream& out, const std::vector<std::size_t>& record_sizes,
                  const std::vector<std::size_t>& segment_sizes);

}  // namespace fixwal

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fixwal/crypto.hpp"
#include "fixwal/segmentation.hpp"
#include "fixwal/storage.hpp"
#include "fixwal/wal.hpp"

namespace fixwal {

inline constexpr char kCheckpointFile[] = "CHECKPOINT";
inline constexpr char kJournalPrefix[] = "journal.";
inline constexpr std::size_t kCheckpointSidecarSize = 20;

std::string journal_file_name(std::uint32_t fid);
std::optional<std::uint32_t> parse_journal_file_name(const std::string& name);

Bytes encode_checkpoint_sidecar(const CheckpointMarker& marker);
CheckpointMarker decode_checkpoint_sidecar(ByteView bytes);

// Zero-skip scan of a plaintext journal stream: reads a record whenever the
// next 4-byte word is non-zero and skips all-zero words between records.
// A record cut short by the end of the stream, or failing its checksum, ends
// the scan (torn tail). A non-zero word that is not a valid length throws
// RecoveryCorruption.
std::vector<LogRecord> scan_records(ByteView plaintext, const std::string& origin = "stream");

enum class JournalMode {
  kSegmented,      // fixed-size encrypted stored units
  kUnpadded,       // one plaintext write per flush, as produced (baseline)
  kNaiveFullSlot,  // every flush padded to the slot capacity (baseline)
};

struct JournalOptions {
  std::size_t segment_size = kDefaultSegmentSize;
  std::size_t slot_capacity = kDefaultSlotCapacity;
  JournalMode mode = JournalMode::kSegmented;
  bool parallel_crypto = true;
};

// Local padded journal: one file per checkpoint epoch, fixed-size stored
// units, an atomically replaced CHECKPOINT sidecar, and zero-skip recovery.
// Single appender at a time.
class JournalBackend : public DurabilityBackend {
 public:
  JournalBackend(Storage& storage, ReplicaKey key, JournalOptions options = {});

  // Encrypts each segment and writes it as one stored unit, then syncs.
  Lsn append_segments(const std::vector<Segment>& segments);

  void persist(ByteView slot_bytes, std::uint32_t ssn) override;
  Lsn position() const override;
  std::uint64_t next_checkpoint_id() const override;
  // Replaces the sidecar, then opens a fresh journal file.
  void commit_checkpoint(const CheckpointMarker& marker) override;
  std::vector<LogRecord> recover() override;

  // Deletes journal files older than the checkpoint's file. Idempotent.
  std::size_t gc_journal(const CheckpointMarker& current);

  std::optional<CheckpointMarker> read_checkpoint() const;
  std::vector<std::uint32_t> journal_files() const;
  std::uint32_t file_id() const { return fid_; }
  const JournalOptions& options() const { return options_; }
  std::size_t unit_size() const { return stored_unit_size(options_.segment_size); }

  // Plaintext byte stream from the checkpoint onward, per journal file.
  std::vector<std::pair<std::uint32_t, Bytes>> read_plaintext() const;

 private:
  Storage& storage_;
  ReplicaKey key_;
  JournalOptions options_;
  std::uint32_t fid_ = 1;
  std::uint64_t append_offset_ = 0;
  std::uint64_t last_ckpt_id_ = 0;
};

// Recovery without a live engine, e.g. after a restart.
std::vector<LogRecord> recover_journal(Storage& storage, const ReplicaKey& key,
                                       const JournalOptions& options);

}  // namespace fixwal

#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "fixwal/replica.hpp"
#include "fixwal/storage.hpp"
#include "fixwal/wal.hpp"

namespace fixwal {

inline constexpr char kMetadataPrefix[] = "metadata.";

std::string metadata_file_name(std::uint32_t fid);

// Ciphertext size of one metadata array on disk: IV plus the plaintext
// rounded up to the cipher block.
std::size_t metadata_blob_size(std::size_t max_segments);

struct QuorumOptions {
  QuorumConfig config;
  SelectionScheme scheme = SelectionScheme::kVnos;
  std::chrono::milliseconds commit_timeout{2000};
  std::uint64_t seed = 1;
  std::uint32_t client_id = 0;
};

using ChannelFactory = std::function<std::unique_ptr<ReplicaChannel>(std::uint32_t replica_id)>;
// Looks up a channel to a recorded replica; nullptr when unreachable.
using ChannelLookup = std::function<ReplicaChannel*(std::uint32_t replica_id)>;

// Replicated cooperative log: each slot flush becomes fixed-size encrypted
// segments, one per randomly chosen quorum group, and commits once every real
// segment has V_w acks. A fixed-size encrypted metadata array per slot records
// who acknowledged what.
class QuorumBackend : public DurabilityBackend {
 public:
  // Forms quorum groups from the registry's active replicas and opens one
  // sender worker with a pre-established channel per grouped replica.
  QuorumBackend(Storage& metadata_storage, ReplicaKey key, QuorumOptions options,
                const Registry& registry, const LogicalClock& clock, ChannelFactory connect);
  ~QuorumBackend() override;

  QuorumBackend(const QuorumBackend&) = delete;
  QuorumBackend& operator=(const QuorumBackend&) = delete;

  void persist(ByteView slot_bytes, std::uint32_t ssn) override;
  Lsn position() const override;
  std::uint64_t next_checkpoint_id() const override;
  void commit_checkpoint(const CheckpointMarker& marker) override;
  std::vector<LogRecord> recover() override;

  // Drops metadata files older than the checkpoint's file.
  std::size_t gc_metadata(const CheckpointMarker& current);

  const std::vector<QuorumGroup>& groups() const { return groups_; }
  const QuorumOptions& options() const { return options_; }
  std::uint32_t file_id() const { return fid_; }
  ReplicaChannel* channel(std::uint32_t replica_id) const;

  // Per-write placement of the last persisted slot (instrumentation).
  std::vector<Placement> last_placement() const;

 private:
  struct Job;
  class Sender;

  Storage& storage_;
  ReplicaKey key_;
  QuorumOptions options_;
  std::vector<QuorumGroup> groups_;
  std::vector<std::unique_ptr<Sender>> senders_;
  std::map<std::uint32_t, Sender*> sender_by_replica_;
  std::mt19937_64 rng_;
  std::uint32_t fid_ = 1;
  std::uint64_t last_ckpt_id_ = 0;

  std::mutex commit_mu_;
  std::condition_variable commit_cv_;

  mutable std::mutex placement_mu_;
  std::vector<Placement> last_placement_;
};

// Rebuilds the plaintext journal stream from metadata and replicas: for each
// committed entry reads one recorded replica, verifies the SHA-256 digest
// (falling back to the next recorded replica), decrypts, and concatenates
// segments in SN order and slots in SSN order.
Bytes recover_assemble(const Storage& metadata_storage, const ReplicaKey& key,
                       const QuorumConfig& config, const ChannelLookup& lookup);

}  // namespace fixwal

#include "fixwal/quorum_backend.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "fixwal/error.hpp"
#include "fixwal/journal.hpp"

namespace fixwal {

std::string metadata_file_name(std::uint32_t fid) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%010u", kMetadataPrefix, fid);
  return buf;
}

namespace {

std::optional<std::uint32_t> parse_metadata_file_name(const std::string& name) {
  const std::string_view prefix(kMetadataPrefix);
  if (name.size() != prefix.size() + 10 || name.compare(0, prefix.size(), prefix) != 0) {
    return std::nullopt;
  }
  std::uint32_t fid = 0;
  auto [ptr, ec] = std::from_chars(name.data() + prefix.size(), name.data() + name.size(), fid);
  if (ec != std::errc() || ptr != name.data() + name.size()) return std::nullopt;
  return fid;
}

std::vector<std::uint32_t> metadata_files(const Storage& storage) {
  std::vector<std::uint32_t> out;
  for (const auto& name : storage.list()) {
    if (auto fid = parse_metadata_file_name(name)) out.push_back(*fid);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<CheckpointMarker> read_sidecar(const Storage& storage) {
  if (!storage.exists(kCheckpointFile)) return std::nullopt;
  return decode_checkpoint_sidecar(storage.read(kCheckpointFile));
}

}  // namespace

std::size_t metadata_blob_size(std::size_t max_segments) {
  return kIvSize + round_up(MetadataArray::serialized_size(max_segments), 16);
}

struct QuorumBackend::Job {
  SegmentId sid;
  std::shared_ptr<const StoredUnit> unit;
  bool fake = false;
  std::shared_ptr<MetadataArray> metadata;
  std::size_t entry = 0;
  std::size_t element = 0;
};

// One worker thread per replica, owning that replica's channel.
class QuorumBackend::Sender {
 public:
  Sender(std::unique_ptr<ReplicaChannel> channel, std::function<void()> on_ack)
      : channel_(std::move(channel)), on_ack_(std::move(on_ack)), thread_([this] { run(); }) {}

  ~Sender() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  void enqueue(Job job) {
    {
      std::lock_guard lock(mu_);
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }

  ReplicaChannel* channel() const { return channel_.get(); }

 private:
  void run() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      bool acked = false;
      try {
        acked = channel_->store(job.sid, *job.unit, !job.fake, job.fake);
      } catch (const Error&) {
        acked = false;
      }
      // Fake segments are never awaited and never recorded.
      if (acked && !job.fake) {
        job.metadata->update(job.entry, job.element,
                             static_cast<std::int32_t>(channel_->replica_id()));
        on_ack_();
      }
    }
  }

  std::unique_ptr<ReplicaChannel> channel_;
  std::function<void()> on_ack_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Job> jobs_;
  bool stop_ = false;
  std::thread thread_;
};

QuorumBackend::QuorumBackend(Storage& metadata_storage, ReplicaKey key, QuorumOptions options,
                             const Registry& registry, const LogicalClock& clock,
                             ChannelFactory connect)
    : storage_(metadata_storage), key_(std::move(key)), options_(options), rng_(options.seed) {
  options_.config.validate();
  groups_ = form_quorums(registry.list_active(clock.now(), NodeRole::kReplica), rng_);
  for (const auto& group : groups_) {
    for (auto id : group) {
      senders_.push_back(std::make_unique<Sender>(connect(id), [this] {
        { std::lock_guard lock(commit_mu_); }
        commit_cv_.notify_all();
      }));
      sender_by_replica_[id] = senders_.back().get();
    }
  }
  auto files = metadata_files(storage_);
  if (!files.empty()) fid_ = files.back() + 1;
  if (auto marker = read_sidecar(storage_)) {
    last_ckpt_id_ = marker->ckpt_id;
    fid_ = std::max(fid_, marker->lsn.file_id + 1);
  }
}

QuorumBackend::~QuorumBackend() { senders_.clear(); }

ReplicaChannel* QuorumBackend::channel(std::uint32_t replica_id) const {
  auto it = sender_by_replica_.find(replica_id);
  return it == sender_by_replica_.end() ? nullptr : it->second->channel();
}

std::vector<Placement> QuorumBackend::last_placement() const {
  std::lock_guard lock(placement_mu_);
  return last_placement_;
}

void QuorumBackend::persist(ByteView slot_bytes, std::uint32_t ssn) {
  if (slot_bytes.empty()) return;
  const auto& cfg = options_.config;
  const std::size_t k_max = cfg.max_segments();
  auto segments = segment_slot(slot_bytes, cfg.segment_size);
  const std::size_t n_real = segments.size();
  if (n_real > k_max) {
    throw Error(ErrorCode::kInvalidConfig, "slot of " + std::to_string(slot_bytes.size()) +
                                               " bytes exceeds the maximum write size " +
                                               std::to_string(cfg.max_write_size));
  }
  auto placements = select_quorums(options_.scheme, n_real, groups_.size(), k_max, rng_);
  {
    std::lock_guard lock(placement_mu_);
    last_placement_ = placements;
  }

  auto metadata = std::make_shared<MetadataArray>(ssn, k_max);
  auto units = encrypt_segments(key_, segments);
  for (std::size_t i = 0; i < n_real; ++i) metadata->set_digest(i, digest_segment(segments[i]));

  for (std::size_t i = 0; i < placements.size(); ++i) {
    std::shared_ptr<const StoredUnit> unit;
    if (placements[i].fake) {
      // Random bytes are indistinguishable from an IV plus ciphertext.
      auto fake = std::make_shared<StoredUnit>(stored_unit_size(cfg.segment_size));
      random_bytes(*fake);
      unit = std::move(fake);
    } else {
      unit = std::make_shared<const StoredUnit>(std::move(units[i]));
    }
    const SegmentId sid{fid_, ssn, static_cast<std::uint32_t>(i), 0};
    const auto& group = groups_[placements[i].quorum];
    for (std::size_t j = 0; j < group.size(); ++j) {
      sender_by_replica_.at(group[j])->enqueue({sid, unit, placements[i].fake, metadata, i, j});
    }
  }

  const auto deadline = std::chrono::steady_clock::now() + options_.commit_timeout;
  auto all_committed = [&] {
    for (std::size_t i = 0; i < n_real; ++i) {
      if (!metadata->committed(i, cfg.write_quorum)) return false;
    }
    return true;
  };
  {
    std::unique_lock lock(commit_mu_);
    if (!commit_cv_.wait_until(lock, deadline, all_committed)) {
      throw Error(ErrorCode::kCommitTimeout, "slot " + std::to_string(ssn) +
                                                 " did not reach its write quorum");
    }
  }

  Bytes plain = metadata->serialize();
  plain.resize(round_up(plain.size(), 16), 0);
  const std::string name = metadata_file_name(fid_);
  storage_.append(name, encrypt_segment(key_, plain));
  storage_.sync(name);
}

Lsn QuorumBackend::position() const {
  return {fid_, storage_.size(metadata_file_name(fid_)).value_or(0)};
}

std::uint64_t QuorumBackend::next_checkpoint_id() const { return last_ckpt_id_ + 1; }

void QuorumBackend::commit_checkpoint(const CheckpointMarker& marker) {
  if (marker.ckpt_id <= last_ckpt_id_) {
    throw Error(ErrorCode::kInvalidConfig, "checkpoint ids must increase");
  }
  storage_.write_atomic(kCheckpointFile, encode_checkpoint_sidecar(marker));
  last_ckpt_id_ = marker.ckpt_id;
  ++fid_;
}

std::size_t QuorumBackend::gc_metadata(const CheckpointMarker& current) {
  std::size_t deleted = 0;
  for (auto fid : metadata_files(storage_)) {
    if (fid >= current.lsn.file_id) break;
    if (storage_.remove(metadata_file_name(fid))) ++deleted;
  }
  return deleted;
}

std::vector<LogRecord> QuorumBackend::recover() {
  Bytes stream = recover_assemble(storage_, key_, options_.config,
                                  [this](std::uint32_t id) { return channel(id); });
  return scan_records(stream, "assembled stream");
}

Bytes recover_assemble(const Storage& metadata_storage, const ReplicaKey& key,
                       const QuorumConfig& config, const ChannelLookup& lookup) {
  const std::size_t k_max = config.max_segments();
  const std::size_t blob = metadata_blob_size(k_max);
  const auto marker = read_sidecar(metadata_storage);
  Bytes stream;
  for (auto fid : metadata_files(metadata_storage)) {
    std::uint64_t start = 0;
    if (marker) {
      if (fid < marker->lsn.file_id) continue;
      if (fid == marker->lsn.file_id) start = marker->lsn.offset;
    }
    const Bytes raw = metadata_storage.read(metadata_file_name(fid));
    for (std::uint64_t off = start; off + blob <= raw.size(); off += blob) {
      const Bytes plain = decrypt_segment(key, ByteView(raw).subspan(off, blob));
      const MetadataArray array = MetadataArray::parse(plain, k_max);
      for (std::size_t i = 0; i < k_max; ++i) {
        const std::size_t acks = array.ack_count(i);
        if (acks == 0) continue;
        if (acks < config.write_quorum) {
          throw Error(ErrorCode::kRecoveryCorruption,
                      "uncommitted entry " + std::to_string(i) + " in slot " +
                          std::to_string(array.ssn()));
        }
        const SegmentId sid{fid, array.ssn(), static_cast<std::uint32_t>(i), 0};
        bool answered = false;
        bool recovered = false;
        for (auto id : array.triplet(i)) {
          if (id == kNoAck) continue;
          ReplicaChannel* ch = lookup(static_cast<std::uint32_t>(id));
          if (ch == nullptr) continue;
          auto unit = ch->read(sid);
          if (!unit) continue;
          answered = true;
          if (unit->size() != stored_unit_size(config.segment_size)) continue;
          Bytes segment = decrypt_segment(key, *unit);
          if (digest_segment(segment) != array.digest(i)) continue;
          append_bytes(stream, segment);
          recovered = true;
          break;
        }
        if (!recovered) {
          const std::string where = "segment " + std::to_string(fid) + "/" +
                                    std::to_string(array.ssn()) + "/" + std::to_string(i);
          if (answered) throw Error(ErrorCode::kIntegrityFailure, where + " failed its digest");
          throw Error(ErrorCode::kUnrecoverableSegment, where + " has no reachable replica");
        }
      }
    }
  }
  return stream;
}

}  // namespace fixwal

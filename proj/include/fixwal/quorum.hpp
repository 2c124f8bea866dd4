#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <vector>

#include "fixwal/crypto.hpp"
#include "fixwal/segmentation.hpp"

namespace fixwal {

struct QuorumConfig {
  std::size_t replicas_per_group = 3;  // V
  std::size_t write_quorum = 2;        // V_w
  std::size_t read_quorum = 1;         // V_r
  std::size_t tolerated_failures = 1;  // V_f
  std::size_t segment_size = kDefaultSegmentSize;
  std::size_t max_write_size = 1024;   // MS

  // K = MS / S, the most segments any write may use.
  std::size_t max_segments() const { return max_write_size / segment_size; }
  // The classical V_r + V_w > V and V_w > V/2 rules are not required.
  void validate() const;
};

// 128-bit segment key: FID | SSN | SN | reserved, little-endian words.
struct SegmentId {
  std::uint32_t fid = 0;
  std::uint32_t ssn = 0;
  std::uint32_t sn = 0;
  std::uint32_t reserved = 0;

  auto operator<=>(const SegmentId&) const = default;

  std::array<std::uint8_t, 16> pack() const;
  static SegmentId unpack(ByteView bytes);
};

struct SegmentIdHash {
  std::size_t operator()(const SegmentId& id) const noexcept;
};

using QuorumGroup = std::array<std::uint32_t, 3>;

enum class SelectionScheme { kVnos, kFnos };

struct Placement {
  std::size_t quorum = 0;  // index into the candidate group list
  bool fake = false;
};

// Splits the active replicas into floor(n/3) disjoint groups after a seeded
// shuffle; leftovers stay unassigned.
std::vector<QuorumGroup> form_quorums(const std::set<std::uint32_t>& active, std::mt19937_64& rng);

// VNOS draws one distinct quorum per real segment. FNOS always draws K
// distinct quorums; the first n_real carry real segments, the rest fakes.
std::vector<Placement> select_quorums(SelectionScheme scheme, std::size_t n_real,
                                      std::size_t n_quorums, std::size_t max_segments,
                                      std::mt19937_64& rng);

// Uniformly random k-subset of {0..n-1} in draw order.
std::vector<std::size_t> sample_distinct(std::size_t k, std::size_t n, std::mt19937_64& rng);

inline constexpr std::int32_t kNoAck = -1;

// Per-slot metadata: K triplets of acknowledging replica ids plus segment
// digests. Each triplet element has exactly one writer (the sender worker of
// that replica), so updates need no locking.
class MetadataArray {
 public:
  MetadataArray(std::uint32_t ssn, std::size_t max_segments);

  std::uint32_t ssn() const { return ssn_; }
  std::size_t size() const { return count_; }

  void set_digest(std::size_t entry, const SegmentDigest& digest);
  const SegmentDigest& digest(std::size_t entry) const { return entries_[entry].digest; }

  // Moves the owned element from kNoAck to replica_id. Throws
  // std::logic_error if the element was already written.
  void update(std::size_t entry, std::size_t element, std::int32_t replica_id);

  std::int32_t element(std::size_t entry, std::size_t element) const;
  std::array<std::int32_t, 3> triplet(std::size_t entry) const;
  std::size_t ack_count(std::size_t entry) const;
  bool committed(std::size_t entry, std::size_t write_quorum) const;
  bool sentinel_only(std::size_t entry) const { return ack_count(entry) == 0; }

  // [ssn u32][K x (3 x i32 triplet, 32-byte digest)], little-endian.
  Bytes serialize() const;
  static MetadataArray parse(ByteView bytes, std::size_t max_segments);
  static std::size_t serialized_size(std::size_t max_segments) { return 4 + max_segments * 44; }

  bool operator==(const MetadataArray& other) const;

 private:
  struct Entry {
    std::array<std::atomic<std::int32_t>, 3> triplet{kNoAck, kNoAck, kNoAck};
    SegmentDigest digest{};
  };
  std::uint32_t ssn_;
  std::size_t count_;
  std::unique_ptr<Entry[]> entries_;
};

class LogicalClock {
 public:
  std::int64_t now() const { return seconds_.load(); }
  void advance(std::int64_t seconds) { seconds_ += seconds; }
  void set(std::int64_t seconds) { seconds_ = seconds; }

 private:
  std::atomic<std::int64_t> seconds_{0};
};

enum class NodeRole { kReplica, kClient };

// Lease registry: nodes register, renew with heartbeats, and drop out of
// list_active once their last heartbeat is older than the eviction horizon.
class Registry {
 public:
  static constexpr std::int64_t kHeartbeatInterval = 30;
  static constexpr std::int64_t kEvictionHorizon = 90;

  void register_node(std::uint32_t id, std::int64_t t, NodeRole role = NodeRole::kReplica);
  void deregister(std::uint32_t id);
  // Throws Unregistered for an unknown id.
  void heartbeat(std::uint32_t id, std::int64_t t);
  std::set<std::uint32_t> list_active(std::int64_t t, NodeRole role = NodeRole::kReplica) const;
  bool is_alive(std::uint32_t id, std::int64_t t) const;

 private:
  struct Lease {
    NodeRole role;
    std::int64_t last_heartbeat;
  };
  mutable std::mutex mu_;
  std::map<std::uint32_t, Lease> leases_;
};

}  // namespace fixwal

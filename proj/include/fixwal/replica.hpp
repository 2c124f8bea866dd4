#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fixwal/quorum.hpp"

namespace fixwal {

// Wire frames: [len u32][type u8][sid 16][unit...], len counting type onward.
enum class FrameType : std::uint8_t {
  kStore = 1,
  kAck = 2,
  kRead = 3,
  kReadOk = 4,
  kNotFound = 5,
};

struct Frame {
  FrameType type = FrameType::kStore;
  SegmentId sid;
  Bytes unit;  // kStore and kReadOk only

  bool operator==(const Frame&) const = default;
};

inline constexpr std::size_t kFrameHeaderSize = 4 + 1 + 16;

Bytes encode_frame(const Frame& frame);
// Returns the frame and bytes consumed, or nullopt if `bytes` holds less than
// one full frame. Throws TransportError on a malformed frame.
std::optional<std::pair<Frame, std::size_t>> decode_frame(ByteView bytes);

// Simulated cooperative replica: an in-memory SID -> stored unit map.
class Replica {
 public:
  Replica(std::uint32_t id, std::uint32_t client_id, const LogicalClock& clock);

  std::uint32_t id() const { return id_; }
  std::uint32_t client_id() const { return client_id_; }
  bool alive() const { return alive_.load(); }
  void kill() { alive_ = false; }
  void revive() { alive_ = true; }

  // Idempotent per sid; the last store wins.
  void store(const SegmentId& sid, ByteView unit);
  // Throws NotFound.
  StoredUnit read(const SegmentId& sid) const;
  // Dead replicas never answer.
  std::optional<Frame> handle(const Frame& request);

  // Drops segments older than `interval` while the owning client is alive in
  // the registry; keeps everything while it is not.
  std::size_t gc(const Registry& registry, std::int64_t interval);

  std::size_t segment_count() const;
  std::vector<SegmentId> segment_ids() const;
  // Fault injection: flips one byte of a stored unit.
  bool corrupt(const SegmentId& sid, std::size_t byte_index = 20);

 private:
  struct Stored {
    StoredUnit unit;
    std::int64_t stored_at = 0;
  };
  std::uint32_t id_;
  std::uint32_t client_id_;
  const LogicalClock& clock_;
  std::atomic<bool> alive_{true};
  mutable std::mutex mu_;
  std::unordered_map<SegmentId, Stored, SegmentIdHash> segments_;
};

// One pre-established connection from a sender to one replica.
class ReplicaChannel {
 public:
  virtual ~ReplicaChannel() = default;
  virtual std::uint32_t replica_id() const = 0;
  // Sends the unit. With await_ack, returns whether an ack arrived before the
  // timeout; without, returns once the frame is sent. `fake` never leaves the
  // sender; it exists for instrumentation.
  virtual bool store(const SegmentId& sid, ByteView unit, bool await_ack, bool fake) = 0;
  // nullopt when the replica does not answer or lacks the segment.
  virtual std::optional<StoredUnit> read(const SegmentId& sid) = 0;
};

struct MessageEvent {
  std::uint32_t replica_id = 0;
  SegmentId sid;
  std::size_t frame_size = 0;
  bool fake = false;
};

// Deterministic in-process transport with seeded per-channel latency and
// fault hooks.
class InProcessBus {
 public:
  void add(std::shared_ptr<Replica> replica);
  std::shared_ptr<Replica> replica(std::uint32_t id) const;
  std::vector<std::shared_ptr<Replica>> replicas() const;

  std::unique_ptr<ReplicaChannel> connect(std::uint32_t replica_id, std::uint64_t seed = 0);

  // Uniform one-way latency applied before an awaited ack is observed.
  void set_latency(std::chrono::microseconds min, std::chrono::microseconds max);
  // Extra delay for a particular ack; used to withhold acks.
  using AckDelay =
      std::function<std::chrono::microseconds(std::uint32_t replica, const SegmentId&, bool fake)>;
  void set_ack_delay(AckDelay delay);
  using Observer = std::function<void(const MessageEvent&)>;
  void set_observer(Observer observer);

 private:
  friend class InProcessChannel;
  mutable std::mutex mu_;
  std::map<std::uint32_t, std::shared_ptr<Replica>> replicas_;
  std::chrono::microseconds min_latency_{0};
  std::chrono::microseconds max_latency_{0};
  AckDelay ack_delay_;
  Observer observer_;
};

// TCP replica endpoint on 127.0.0.1 serving one Replica.
class ReplicaServer {
 public:
  explicit ReplicaServer(std::shared_ptr<Replica> replica);
  ~ReplicaServer();

  ReplicaServer(const ReplicaServer&) = delete;
  ReplicaServer& operator=(const ReplicaServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(int fd);

  std::shared_ptr<Replica> replica_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

// Client side of the socket transport; connects once in the constructor.
std::unique_ptr<ReplicaChannel> connect_socket(const std::string& host, std::uint16_t port,
                                               std::uint32_t replica_id,
                                               std::chrono::milliseconds timeout);

}  // namespace fixwal

#include "fixwal/replica.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "fixwal/error.hpp"

namespace fixwal {

// ---- frames -----------------------------------------------------------------

Bytes encode_frame(const Frame& frame) {
  Bytes out;
  out.reserve(kFrameHeaderSize + frame.unit.size());
  append_u32(out, static_cast<std::uint32_t>(1 + 16 + frame.unit.size()));
  out.push_back(static_cast<std::uint8_t>(frame.type));
  auto sid = frame.sid.pack();
  append_bytes(out, sid);
  append_bytes(out, frame.unit);
  return out;
}

std::optional<std::pair<Frame, std::size_t>> decode_frame(ByteView bytes) {
  if (bytes.size() < 4) return std::nullopt;
  const std::uint32_t len = get_u32(bytes.data());
  if (len < 17) throw Error(ErrorCode::kTransportError, "frame length " + std::to_string(len));
  if (bytes.size() < 4 + static_cast<std::size_t>(len)) return std::nullopt;
  const std::uint8_t type = bytes[4];
  if (type < 1 || type > 5) {
    throw Error(ErrorCode::kTransportError, "unknown frame type " + std::to_string(type));
  }
  Frame f;
  f.type = static_cast<FrameType>(type);
  f.sid = SegmentId::unpack(bytes.subspan(5, 16));
  f.unit.assign(bytes.begin() + kFrameHeaderSize, bytes.begin() + 4 + len);
  return std::make_pair(std::move(f), 4 + static_cast<std::size_t>(len));
}

// ---- Replica ----------------------------------------------------------------

Replica::Replica(std::uint32_t id, std::uint32_t client_id, const LogicalClock& clock)
    : id_(id), client_id_(client_id), clock_(clock) {}

void Replica::store(const SegmentId& sid, ByteView unit) {
  std::lock_guard lock(mu_);
  segments_[sid] = {StoredUnit(unit.begin(), unit.end()), clock_.now()};
}

StoredUnit Replica::read(const SegmentId& sid) const {
  std::lock_guard lock(mu_);
  auto it = segments_.find(sid);
  if (it == segments_.end()) {
    throw Error(ErrorCode::kNotFound, "segment " + std::to_string(sid.fid) + "/" +
                                          std::to_string(sid.ssn) + "/" + std::to_string(sid.sn));
  }
  return it->second.unit;
}

std::optional<Frame> Replica::handle(const Frame& request) {
  if (!alive()) return std::nullopt;
  switch (request.type) {
    case FrameType::kStore:
      store(request.sid, request.unit);
      return Frame{FrameType::kAck, request.sid, {}};
    case FrameType::kRead: {
      std::lock_guard lock(mu_);
      auto it = segments_.find(request.sid);
      if (it == segments_.end()) return Frame{FrameType::kNotFound, request.sid, {}};
      return Frame{FrameType::kReadOk, request.sid, it->second.unit};
    }
    default:
      return std::nullopt;
  }
}

std::size_t Replica::gc(const Registry& registry, std::int64_t interval) {
  const std::int64_t now = clock_.now();
  if (!registry.is_alive(client_id_, now)) return 0;
  std::lock_guard lock(mu_);
  std::size_t dropped = 0;
  for (auto it = segments_.begin(); it != segments_.end();) {
    if (now - it->second.stored_at >= interval) {
      it = segments_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

std::size_t Replica::segment_count() const {
  std::lock_guard lock(mu_);
  return segments_.size();
}

std::vector<SegmentId> Replica::segment_ids() const {
  std::lock_guard lock(mu_);
  std::vector<SegmentId> out;
  for (const auto& [sid, _] : segments_) out.push_back(sid);
  std::sort(out.begin(), out.end());
  return out;
}

bool Replica::corrupt(const SegmentId& sid, std::size_t byte_index) {
  std::lock_guard lock(mu_);
  auto it = segments_.find(sid);
  if (it == segments_.end() || it->second.unit.empty()) return false;
  it->second.unit[byte_index % it->second.unit.size()] ^= 0x5A;
  return true;
}

// ---- in-process transport ---------------------------------------------------

class InProcessChannel : public ReplicaChannel {
 public:
  InProcessChannel(InProcessBus& bus, std::shared_ptr<Replica> replica, std::uint64_t seed)
      : bus_(bus), replica_(std::move(replica)), rng_(seed ^ replica_->id()) {}

  std::uint32_t replica_id() const override { return replica_->id(); }

  bool store(const SegmentId& sid, ByteView unit, bool await_ack, bool fake) override {
    Frame request{FrameType::kStore, sid, Bytes(unit.begin(), unit.end())};
    const Bytes wire = encode_frame(request);
    InProcessBus::Observer observer;
    InProcessBus::AckDelay ack_delay;
    std::chrono::microseconds lo, hi;
    {
      std::lock_guard lock(bus_.mu_);
      observer = bus_.observer_;
      ack_delay = bus_.ack_delay_;
      lo = bus_.min_latency_;
      hi = bus_.max_latency_;
    }
    if (observer) observer({replica_->id(), sid, wire.size(), fake});
    auto decoded = decode_frame(wire);
    auto reply = replica_->handle(decoded->first);
    if (!await_ack) return true;
    auto delay = lo;
    if (hi > lo) {
      std::uniform_int_distribution<std::int64_t> d(lo.count(), hi.count());
      delay = std::chrono::microseconds(d(rng_));
    }
    if (ack_delay) delay += ack_delay(replica_->id(), sid, fake);
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    return reply && reply->type == FrameType::kAck && reply->sid == sid;
  }

  std::optional<StoredUnit> read(const SegmentId& sid) override {
    auto reply = replica_->handle(Frame{FrameType::kRead, sid, {}});
    if (!reply || reply->type != FrameType::kReadOk) return std::nullopt;
    return std::move(reply->unit);
  }

 private:
  InProcessBus& bus_;
  std::shared_ptr<Replica> replica_;
  std::mt19937_64 rng_;
};

void InProcessBus::add(std::shared_ptr<Replica> replica) {
  std::lock_guard lock(mu_);
  replicas_[replica->id()] = std::move(replica);
}

std::shared_ptr<Replica> InProcessBus::replica(std::uint32_t id) const {
  std::lock_guard lock(mu_);
  auto it = replicas_.find(id);
  if (it == replicas_.end()) throw Error(ErrorCode::kNotFound, "replica " + std::to_string(id));
  return it->second;
}

std::vector<std::shared_ptr<Replica>> InProcessBus::replicas() const {
  std::lock_guard lock(mu_);
  std::vector<std::shared_ptr<Replica>> out;
  for (const auto& [_, r] : replicas_) out.push_back(r);
  return out;
}

std::unique_ptr<ReplicaChannel> InProcessBus::connect(std::uint32_t replica_id,
                                                      std::uint64_t seed) {
  return std::make_unique<InProcessChannel>(*this, replica(replica_id), seed);
}

void InProcessBus::set_latency(std::chrono::microseconds min, std::chrono::microseconds max) {
  std::lock_guard lock(mu_);
  min_latency_ = min;
  max_latency_ = std::max(min, max);
}

void InProcessBus::set_ack_delay(AckDelay delay) {
  std::lock_guard lock(mu_);
  ack_delay_ = std::move(delay);
}

void InProcessBus::set_observer(Observer observer) {
  std::lock_guard lock(mu_);
  observer_ = std::move(observer);
}

// ---- socket transport -------------------------------------------------------

namespace {

bool write_all(int fd, ByteView data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

// Reads one frame; nullopt on EOF, timeout or error.
std::optional<Frame> read_frame(int fd, Bytes& buffer) {
  for (;;) {
    if (auto decoded = decode_frame(buffer)) {
      buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(decoded->second));
      return std::move(decoded->first);
    }
    std::uint8_t chunk[8192];
    ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer.insert(buffer.end(), chunk, chunk + n);
  }
}

class SocketChannel : public ReplicaChannel {
 public:
  SocketChannel(int fd, std::uint32_t replica_id) : fd_(fd), replica_id_(replica_id) {}
  ~SocketChannel() override { ::close(fd_); }

  std::uint32_t replica_id() const override { return replica_id_; }

  bool store(const SegmentId& sid, ByteView unit, bool await_ack, bool /*fake*/) override {
    std::lock_guard lock(mu_);
    if (!write_all(fd_, encode_frame({FrameType::kStore, sid, Bytes(unit.begin(), unit.end())}))) {
      return false;
    }
    if (!await_ack) return true;
    // Acks for unawaited stores arrive in order ahead of ours; skip them.
    while (auto reply = read_frame(fd_, buffer_)) {
      if (reply->type == FrameType::kAck && reply->sid == sid) return true;
    }
    return false;
  }

  std::optional<StoredUnit> read(const SegmentId& sid) override {
    std::lock_guard lock(mu_);
    if (!write_all(fd_, encode_frame({FrameType::kRead, sid, {}}))) return std::nullopt;
    while (auto reply = read_frame(fd_, buffer_)) {
      if (reply->sid != sid) continue;
      if (reply->type == FrameType::kReadOk) return std::move(reply->unit);
      if (reply->type == FrameType::kNotFound) return std::nullopt;
    }
    return std::nullopt;
  }

 private:
  int fd_;
  std::uint32_t replica_id_;
  std::mutex mu_;
  Bytes buffer_;
};

}  // namespace

ReplicaServer::ReplicaServer(std::shared_ptr<Replica> replica) : replica_(std::move(replica)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kTransportError, std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    ::close(listen_fd_);
    throw Error(ErrorCode::kTransportError, std::string("bind/listen: ") + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

ReplicaServer::~ReplicaServer() { stop(); }

void ReplicaServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void ReplicaServer::accept_loop() {
  while (!stopping_) {
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void ReplicaServer::serve(int fd) {
  Bytes buffer;
  try {
    while (auto request = read_frame(fd, buffer)) {
      auto reply = replica_->handle(*request);
      if (reply && !write_all(fd, encode_frame(*reply))) break;
    }
  } catch (const Error&) {
    // Malformed input closes the connection.
  }
  ::close(fd);
}

std::unique_ptr<ReplicaChannel> connect_socket(const std::string& host, std::uint16_t port,
                                               std::uint32_t replica_id,
                                               std::chrono::milliseconds timeout) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(ErrorCode::kTransportError, std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1 ||
      ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw Error(ErrorCode::kTransportError, "connect " + host + ":" + std::to_string(port));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  timeval tv{};
  tv.tv_sec = timeout.count() / 1000;
  tv.tv_usec = (timeout.count() % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  return std::make_unique<SocketChannel>(fd, replica_id);
}

}  // namespace fixwal

#include <doctest.h>

#include <functional>
#include <set>

#include "fixwal/crypto.hpp"
#include "fixwal/error.hpp"
#include "fixwal/replica.hpp"
#include "support.hpp"

using namespace fixwal;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected fixwal::Error");
  return ErrorCode::kInvalidConfig;
}

}  // namespace

TEST_CASE("frame encoding roundtrips and splits a stream") {
  Frame store{FrameType::kStore, {3, 4, 5, 0}, Bytes(144, 0xAB)};
  Frame ack{FrameType::kAck, {3, 4, 5, 0}, {}};
  const Bytes a = encode_frame(store);
  const Bytes b = encode_frame(ack);
  CHECK(a.size() == kFrameHeaderSize + 144);
  CHECK(b.size() == kFrameHeaderSize);
  CHECK(a[0] == 1 + 16 + 144);
  CHECK(a[4] == 1);

  Bytes stream = a;
  append_bytes(stream, b);
  auto first = decode_frame(stream);
  REQUIRE(first);
  CHECK(first->first == store);
  CHECK(first->second == a.size());
  auto second = decode_frame(ByteView(stream).subspan(first->second));
  REQUIRE(second);
  CHECK(second->first == ack);

  // Short input is incomplete rather than malformed.
  CHECK_FALSE(decode_frame(ByteView(a).first(3)));
  CHECK_FALSE(decode_frame(ByteView(a).first(a.size() - 1)));
}

TEST_CASE("malformed frames raise TransportError") {
  Bytes bad_len = {4, 0, 0, 0, 1};
  CHECK(code_of([&] { decode_frame(bad_len); }) == ErrorCode::kTransportError);
  Bytes bad_type = encode_frame(Frame{FrameType::kAck, {}, {}});
  bad_type[4] = 9;
  CHECK(code_of([&] { decode_frame(bad_type); }) == ErrorCode::kTransportError);
}

TEST_CASE("replica store and read") {
  LogicalClock clock;
  Replica r(1, 100, clock);
  const SegmentId sid{1, 2, 0, 0};
  CHECK(code_of([&] { r.read(sid); }) == ErrorCode::kNotFound);
  r.store(sid, Bytes(144, 1));
  r.store(sid, Bytes(144, 2));
  CHECK(r.segment_count() == 1);
  CHECK(r.read(sid) == Bytes(144, 2));

  auto ok = r.handle(Frame{FrameType::kRead, sid, {}});
  REQUIRE(ok);
  CHECK(ok->type == FrameType::kReadOk);
  CHECK(ok->unit == Bytes(144, 2));
  auto missing = r.handle(Frame{FrameType::kRead, {9, 9, 9, 0}, {}});
  REQUIRE(missing);
  CHECK(missing->type == FrameType::kNotFound);
  auto ack = r.handle(Frame{FrameType::kStore, {1, 2, 1, 0}, Bytes(144, 3)});
  REQUIRE(ack);
  CHECK(ack->type == FrameType::kAck);
  CHECK(r.segment_count() == 2);

  CHECK(r.corrupt(sid));
  CHECK(r.read(sid) != Bytes(144, 2));
  CHECK_FALSE(r.corrupt({7, 7, 7, 0}));
}

TEST_CASE("dead replicas never answer") {
  LogicalClock clock;
  InProcessBus bus;
  auto r = std::make_shared<Replica>(1, 100, clock);
  bus.add(r);
  auto ch = bus.connect(1);
  const SegmentId sid{1, 1, 0, 0};
  CHECK(ch->store(sid, Bytes(144, 1), true, false));
  r->kill();
  CHECK_FALSE(r->handle(Frame{FrameType::kRead, sid, {}}));
  CHECK_FALSE(ch->read(sid));
  CHECK_FALSE(ch->store({1, 1, 1, 0}, Bytes(144, 1), true, false));
  r->revive();
  CHECK(ch->read(sid) == Bytes(144, 1));
}

TEST_CASE("replica gc follows client liveness") {
  for (std::int64_t interval : {30, 60}) {
    CAPTURE(interval);
    LogicalClock clock;
    Registry registry;
    registry.register_node(100, 0, NodeRole::kClient);
    Replica r(1, 100, clock);
    r.store({1, 1, 0, 0}, Bytes(16, 1));
    clock.advance(interval / 2);
    r.store({1, 2, 0, 0}, Bytes(16, 2));
    registry.heartbeat(100, clock.now());

    CHECK(r.gc(registry, interval) == 0);
    clock.advance(interval - interval / 2);
    registry.heartbeat(100, clock.now());
    CHECK(r.gc(registry, interval) == 1);
    CHECK(r.segment_count() == 1);

    // An evicted client keeps its segments for recovery.
    clock.advance(Registry::kEvictionHorizon + 1);
    CHECK_FALSE(registry.is_alive(100, clock.now()));
    CHECK(r.gc(registry, interval) == 0);
    CHECK(r.segment_count() == 1);
  }
}

TEST_CASE("observed frames have one size for real and fake segments") {
  LogicalClock clock;
  InProcessBus bus;
  for (std::uint32_t id = 1; id <= 3; ++id) bus.add(std::make_shared<Replica>(id, 100, clock));
  std::set<std::size_t> sizes;
  std::size_t fakes = 0;
  bus.set_observer([&](const MessageEvent& e) {
    sizes.insert(e.frame_size);
    fakes += e.fake;
  });
  const ReplicaKey key = test::fixed_key();
  std::mt19937_64 rng(4);
  for (std::uint32_t id = 1; id <= 3; ++id) {
    auto ch = bus.connect(id, 9);
    const Bytes real = encrypt_segment(key, test::random_payload(rng, 128));
    const Bytes fake = encrypt_segment(key, Bytes(128, 0));
    CHECK(ch->store({1, id, 0, 0}, real, true, false));
    CHECK(ch->store({1, id, 1, 0}, fake, false, true));
  }
  CHECK(fakes == 3);
  CHECK(sizes == std::set<std::size_t>{kFrameHeaderSize + 144});
}

TEST_CASE("ack delay hook holds back selected acks") {
  LogicalClock clock;
  InProcessBus bus;
  bus.add(std::make_shared<Replica>(1, 100, clock));
  bool fake_seen = false;
  bus.set_ack_delay([&](std::uint32_t, const SegmentId&, bool fake) {
    fake_seen = fake_seen || fake;
    return std::chrono::microseconds(fake ? 2000 : 0);
  });
  auto ch = bus.connect(1);
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(ch->store({1, 1, 0, 0}, Bytes(144, 0), true, true));
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::microseconds(2000));
  CHECK(fake_seen);
}

TEST_CASE("socket transport stores and reads") {
  LogicalClock clock;
  auto replica = std::make_shared<Replica>(7, 100, clock);
  ReplicaServer server(replica);
  REQUIRE(server.port() != 0);
  auto ch = connect_socket("127.0.0.1", server.port(), 7, std::chrono::milliseconds(200));
  CHECK(ch->replica_id() == 7);
  const SegmentId sid{2, 3, 1, 0};
  const Bytes unit(144, 0x42);
  CHECK(ch->store(sid, unit, true, false));
  CHECK(replica->read(sid) == unit);
  CHECK(ch->read(sid) == unit);
  CHECK_FALSE(ch->read({2, 3, 2, 0}));
  CHECK(ch->store({2, 3, 2, 0}, unit, false, false));

  replica->kill();
  CHECK_FALSE(ch->read(sid));
  server.stop();
}

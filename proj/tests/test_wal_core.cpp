#include <doctest.h>

#include <atomic>
#include <cstring>
#include <functional>
#include <thread>

#include "fixwal/error.hpp"
#include "fixwal/record.hpp"
#include "fixwal/wal.hpp"
#include "support.hpp"

using namespace fixwal;
using fixwal::test::RecordingBackend;

namespace {

// Bitwise reflected CRC-32C, independent of the library's table-driven one.
std::uint32_t crc32c_reference(ByteView data) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t byte : data) {
    crc ^= byte;
    for (int i = 0; i < 8; ++i) crc = (crc >> 1) ^ (0x82F63B78u & (0u - (crc & 1u)));
  }
  return ~crc;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kNoData;
}

}  // namespace

TEST_CASE("crc32c check value and reference agreement") {
  const std::string check = "123456789";
  const ByteView v(reinterpret_cast<const std::uint8_t*>(check.data()), check.size());
  CHECK(crc32c(v) == 0xE3069283u);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Bytes p = test::random_payload(rng, rng() % 700);
    CHECK(crc32c(p) == crc32c_reference(p));
  }
}

TEST_CASE("encode_record sizes") {
  CHECK(encode_record(Bytes(100, 1)).size() == 116);
  CHECK(get_u32(encode_record(Bytes(100, 1)).data()) == 116);
  CHECK(encode_record(Bytes(1, 9)).size() == 20);
  CHECK(encode_record(Bytes(800, 9)).size() == 816);
  for (std::size_t n = 1; n < 64; ++n) CHECK(encode_record(Bytes(n, 1)).size() == 16 + (n + 3) / 4 * 4);
}

TEST_CASE("header layout is len|crc|flags|reserved little-endian") {
  const Bytes payload{1, 2, 3};
  const Bytes rec = encode_record(payload, record_flags::kCheckpoint);
  REQUIRE(rec.size() == 20);
  CHECK(rec[0] == 20);
  CHECK(rec[1] == 0);
  const Bytes padded{1, 2, 3, 0};
  CHECK(get_u32(rec.data() + 4) == crc32c_reference(padded));
  CHECK(get_u32(rec.data() + 8) == 1);
  CHECK(get_u32(rec.data() + 12) == 0);
  CHECK(std::equal(padded.begin(), padded.end(), rec.begin() + 16));
}

TEST_CASE("decode roundtrip property") {
  std::mt19937_64 rng(11);
  std::vector<std::size_t> sizes{1, 2, 3, 4, 5, 127, 128, 129, 4096, 65537, 1 << 20};
  for (int i = 0; i < 100; ++i) sizes.push_back(1 + rng() % 5000);
  for (std::size_t n : sizes) {
    const Bytes p = test::random_payload(rng, n);
    const std::uint32_t flags = static_cast<std::uint32_t>(rng() & 1);
    const Bytes rec = encode_record(p, flags);
    ByteCursor cur(rec);
    const LogRecord r = decode_record(cur);
    CHECK(cur.at_end());
    CHECK(r.header.flags == flags);
    CHECK(r.payload.size() - p.size() <= 3);
    CHECK(r.payload == test::padded(p));
  }
}

TEST_CASE("decode errors") {
  Bytes rec = encode_record(Bytes(40, 5));
  SUBCASE("length not a multiple of 4") {
    put_u32(rec.data(), 13);
    ByteCursor cur(rec);
    CHECK(code_of([&] { decode_record(cur); }) == ErrorCode::kMalformedHeader);
  }
  SUBCASE("length below header size") {
    put_u32(rec.data(), 12);
    ByteCursor cur(rec);
    CHECK(code_of([&] { decode_record(cur); }) == ErrorCode::kMalformedHeader);
  }
  SUBCASE("cut short") {
    rec.resize(rec.size() - 4);
    ByteCursor cur(rec);
    CHECK(code_of([&] { decode_record(cur); }) == ErrorCode::kTruncatedRecord);
  }
  SUBCASE("checksum mismatch") {
    rec[20] ^= 0x40;
    ByteCursor cur(rec);
    CHECK(code_of([&] { decode_record(cur); }) == ErrorCode::kCorruptRecord);
  }
}

TEST_CASE("parse_records over a gap-free stream") {
  Bytes stream;
  std::vector<Bytes> payloads{{1, 2, 3, 4}, Bytes(33, 7), Bytes(1, 1)};
  for (const auto& p : payloads) append_bytes(stream, encode_record(p));
  const auto recs = parse_records(stream);
  REQUIRE(recs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(recs[i].payload == test::padded(payloads[i]));
}

TEST_CASE("slot append and flush") {
  RecordingBackend backend;
  Slot slot(kDefaultSlotCapacity);
  const Bytes rec116 = encode_record(Bytes(100, 1));

  SUBCASE("buffered without full sync") {
    auto r = slot.append(rec116, false, backend);
    CHECK_FALSE(r.flushed);
    CHECK(slot.buffered() == 116);
    CHECK(backend.flushes.empty());
  }
  SUBCASE("record that does not fit flushes the slot first") {
    // 131000 bytes buffered, then a 116-byte record: 131116 > 131072.
    const Bytes big = encode_record(Bytes(131000 - 16, 2));
    slot.append(big, false, backend);
    REQUIRE(slot.buffered() == 131000);
    auto r = slot.append(rec116, false, backend);
    CHECK(r.flushed);
    REQUIRE(backend.flushes.size() == 1);
    CHECK(backend.flushes[0].size() == 131000);
    CHECK(slot.buffered() == 116);
  }
  SUBCASE("full sync flushes before returning") {
    auto r = slot.append(rec116, true, backend);
    CHECK(r.flushed);
    REQUIRE(backend.flushes.size() == 1);
    CHECK(backend.flushes[0] == rec116);
    CHECK(slot.buffered() == 0);
  }
  SUBCASE("oversize record gets its own flush") {
    Slot small(256);
    small.append(rec116, false, backend);
    const Bytes huge = encode_record(Bytes(1000, 3));
    auto r = small.append(huge, false, backend);
    CHECK(r.flushed);
    REQUIRE(backend.flushes.size() == 2);
    CHECK(backend.flushes[0] == rec116);
    CHECK(backend.flushes[1] == huge);
    CHECK(small.buffered() == 0);
  }
  SUBCASE("empty flush writes nothing") {
    auto receipt = slot.flush(backend);
    CHECK(receipt.byte_count == 0);
    CHECK(backend.flushes.empty());
  }
  SUBCASE("ssn strictly increases") {
    slot.append(rec116, true, backend);
    slot.append(rec116, true, backend);
    REQUIRE(backend.ssns.size() == 2);
    CHECK(backend.ssns[1] > backend.ssns[0]);
  }
  SUBCASE("failed flush leaves the slot unchanged") {
    slot.append(rec116, false, backend);
    backend.fail_next = true;
    CHECK_THROWS(slot.flush(backend));
    CHECK(slot.buffered() == 116);
    CHECK(slot.flush(backend).byte_count == 116);
  }
  SUBCASE("malformed record rejected") {
    Bytes bad = rec116;
    put_u32(bad.data(), 13);
    CHECK(code_of([&] { slot.append(bad, false, backend); }) == ErrorCode::kMalformedHeader);
  }
}

TEST_CASE("lsn order equals append order equals recovery order") {
  RecordingBackend backend;
  WalEngine engine(backend, test::slot_options(1024));
  std::mt19937_64 rng(5);
  std::vector<Bytes> payloads;
  Lsn last{};
  for (int i = 0; i < 300; ++i) {
    payloads.push_back(test::random_payload(rng, 1 + rng() % 300));
    auto r = engine.append(payloads.back(), rng() % 7 == 0);
    if (i > 0) CHECK(last < r.lsn);
    last = r.lsn;
  }
  engine.flush();
  for (const auto& f : backend.flushes) CHECK_NOTHROW(parse_records(f));
  const auto recs = backend.recover();
  REQUIRE(recs.size() == payloads.size());
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].payload == test::padded(payloads[i]));
}

TEST_CASE("concurrent appenders lose nothing") {
  RecordingBackend backend;
  WalEngine engine(backend, test::slot_options(4096));
  constexpr int kThreads = 4;
  constexpr int kPerThread = 500;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < kPerThread; ++i) {
        Bytes p(8);
        put_u32(p.data(), static_cast<std::uint32_t>(t));
        put_u32(p.data() + 4, static_cast<std::uint32_t>(i));
        engine.append(p, i % 50 == 0);
      }
    });
  }
  for (auto& th : threads) th.join();
  engine.flush();
  const auto recs = backend.recover();
  REQUIRE(recs.size() == kThreads * kPerThread);
  std::vector<int> next(kThreads, 0);
  for (const auto& r : recs) {
    const auto t = get_u32(r.payload.data());
    CHECK(get_u32(r.payload.data() + 4) == static_cast<std::uint32_t>(next[t]));
    ++next[t];
  }
}

TEST_CASE("periodic flush drains the slot") {
  RecordingBackend backend;
  EngineOptions opts;
  opts.flush_policy.interval = std::chrono::milliseconds(20);
  opts.periodic_flush = true;
  WalEngine engine(backend, opts);
  engine.append(Bytes(10, 1), false);
  for (int i = 0; i < 100 && engine.slot().buffered() != 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  engine.stop_periodic_flush();
  CHECK(engine.slot().buffered() == 0);
  CHECK(backend.flushes.size() == 1);
}

TEST_CASE("checkpoint writes a flagged record and commits the marker") {
  RecordingBackend backend;
  WalEngine engine(backend);
  engine.append(Bytes(20, 1), false);
  const auto m1 = engine.checkpoint();
  CHECK(m1.ckpt_id == 1);
  CHECK(m1.lsn.file_id == 1);
  REQUIRE(backend.flushes.size() == 2);
  const auto recs = parse_records(backend.flushes[1]);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].header.is_checkpoint());
  CHECK(get_u64(recs[0].payload.data()) == 1);
  const auto m2 = engine.checkpoint();
  CHECK(m2.ckpt_id == 2);
  CHECK(m2.lsn.file_id == 2);
  auto r = engine.append(Bytes(4, 1), false);
  CHECK(r.lsn.file_id == 3);
  CHECK(r.lsn.offset == 0);
}

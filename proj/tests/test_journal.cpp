#include <doctest.h>

#include <filesystem>
#include <functional>

#include "fixwal/error.hpp"
#include "fixwal/journal.hpp"
#include "support.hpp"

using namespace fixwal;

namespace {

JournalOptions opts(std::size_t s, JournalMode mode = JournalMode::kSegmented) {
  JournalOptions o;
  o.segment_size = s;
  o.mode = mode;
  return o;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kNoData;
}

std::vector<Bytes> payloads_of(const std::vector<LogRecord>& recs) {
  std::vector<Bytes> out;
  for (const auto& r : recs) out.push_back(r.payload);
  return out;
}

}  // namespace

TEST_CASE("journal file naming and sidecar layout") {
  CHECK(journal_file_name(7) == "journal.0000000007");
  CHECK(parse_journal_file_name("journal.0000000007") == 7u);
  CHECK_FALSE(parse_journal_file_name("journal.7").has_value());
  CHECK_FALSE(parse_journal_file_name("CHECKPOINT").has_value());
  const CheckpointMarker m{0x0102030405060708ull, {9, 0x1122334455ull}};
  const Bytes b = encode_checkpoint_sidecar(m);
  REQUIRE(b.size() == 20);
  CHECK(b[0] == 0x08);
  CHECK(get_u32(b.data() + 8) == 9);
  CHECK(get_u64(b.data() + 12) == 0x1122334455ull);
  CHECK(decode_checkpoint_sidecar(b) == m);
}

TEST_CASE("append_segments grows the file by whole stored units") {
  MemoryStorage mem;
  JournalBackend j(mem, test::fixed_key(), opts(128));
  const auto name = journal_file_name(j.file_id());
  const Lsn a = j.append_segments({Bytes(128, 1), Bytes(128, 2), Bytes(128, 3)});
  CHECK(mem.size(name) == 3u * 144u);
  j.append_segments({});
  CHECK(mem.size(name) == 3u * 144u);
  const Lsn b = j.append_segments({Bytes(128, 4)});
  CHECK(a < b);
  CHECK(b.offset == 3 * 144);
}

TEST_CASE("every storage-visible journal write has the same size") {
  MemoryStorage mem;
  ObservedStorage obs(mem);
  JournalBackend j(obs, test::fixed_key(), opts(128));
  WalEngine engine(j);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) engine.append(test::random_payload(rng, 1 + rng() % 3000), rng() % 3 == 0);
  engine.flush();
  const auto hist = obs.size_histogram(kJournalPrefix);
  REQUIRE(hist.size() == 1);
  CHECK(hist.begin()->first == 144);
}

TEST_CASE("recovery example: two records across segment boundaries") {
  MemoryStorage mem;
  JournalBackend j(mem, test::fixed_key(), opts(128));
  const Bytes a(100, 0xA1);  // 116-byte record
  const Bytes b(184, 0xB2);  // 200-byte record
  Bytes slot = encode_record(a);
  append_bytes(slot, encode_record(b));
  j.persist(slot, 0);
  CHECK(mem.size(journal_file_name(j.file_id())) == 3u * 144u);
  const auto recs = j.recover();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].payload == a);
  CHECK(recs[1].payload == b);
}

TEST_CASE("zero-skip scanner") {
  const Bytes a = encode_record(Bytes(100, 1));
  const Bytes b = encode_record(Bytes(184, 2));
  SUBCASE("all zero") { CHECK(scan_records(Bytes(512, 0)).empty()); }
  SUBCASE("padding between records") {
    Bytes s = a;
    s.resize(s.size() + 40, 0);
    append_bytes(s, b);
    s.resize(s.size() + 12, 0);
    CHECK(scan_records(s).size() == 2);
  }
  SUBCASE("truncated final record is a torn tail") {
    Bytes s = a;
    append_bytes(s, b);
    s.resize(a.size() + 100);
    const auto recs = scan_records(s);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].payload == Bytes(100, 1));
  }
  SUBCASE("checksum failure is a torn tail") {
    Bytes s = a;
    append_bytes(s, b);
    s[a.size() + 30] ^= 0xFF;
    CHECK(scan_records(s).size() == 1);
  }
  SUBCASE("implausible non-zero word is corruption") {
    Bytes s = a;
    s.resize(s.size() + 8, 0);
    const Bytes garbage{0xEF, 0xBE, 0xAD, 0xDE};
    append_bytes(s, garbage);
    s.resize(s.size() + 64, 0);
    CHECK(code_of([&] { scan_records(s); }) == ErrorCode::kRecoveryCorruption);
  }
}

TEST_CASE("recovery equals the unsegmented parse for random workloads") {
  std::mt19937_64 rng(99);
  for (std::size_t s : {32u, 64u, 128u, 512u, 4096u}) {
    for (int trial = 0; trial < 20; ++trial) {
      MemoryStorage mem;
      JournalBackend j(mem, test::fixed_key(), opts(s));
      WalEngine engine(j, test::slot_options(8192));
      Bytes oracle_stream;
      for (int i = 0, n = 1 + static_cast<int>(rng() % 80); i < n; ++i) {
        const Bytes p = test::random_payload(rng, 1 + rng() % 2500);
        append_bytes(oracle_stream, encode_record(p));
        engine.append(p, rng() % 4 == 0);
      }
      engine.flush();
      CHECK(j.recover() == parse_records(oracle_stream));
    }
  }
}

TEST_CASE("crash matrix: truncation at every unit boundary recovers the committed prefix") {
  constexpr std::size_t kS = 128;
  constexpr std::size_t kUnit = kS + 16;
  MemoryStorage mem;
  JournalBackend j(mem, test::fixed_key(), opts(kS));
  WalEngine engine(j);
  std::mt19937_64 rng(31);
  std::vector<Bytes> payloads;
  std::vector<std::size_t> record_end;  // plaintext offset one past each record
  std::size_t cursor = 0;
  for (int i = 0; i < 100; ++i) {
    payloads.push_back(test::random_payload(rng, 1 + rng() % 400));
    engine.append(payloads.back(), true);
    cursor += encoded_record_size(payloads.back().size());
    record_end.push_back(cursor);
    cursor = round_up(cursor, kS);  // each full-sync flush starts a new unit
  }
  const std::string name = journal_file_name(j.file_id());
  const Bytes file = mem.read(name);
  REQUIRE(file.size() == cursor / kS * kUnit);

  for (std::size_t units = 0; units <= file.size() / kUnit; ++units) {
    for (std::size_t torn : {std::size_t{0}, std::size_t{1}, kUnit / 2, kUnit - 1}) {
      if (units * kUnit + torn > file.size()) continue;
      MemoryStorage crashed;
      crashed.append(name, ByteView(file).first(units * kUnit + torn));
      crashed.sync(name);
      const auto recs = recover_journal(crashed, test::fixed_key(), opts(kS));
      std::size_t expected = 0;
      while (expected < record_end.size() && record_end[expected] <= units * kS) ++expected;
      REQUIRE(recs.size() == expected);
      for (std::size_t i = 0; i < expected; ++i) CHECK(recs[i].payload == test::padded(payloads[i]));
    }
  }
}

TEST_CASE("injected write failures lose only the uncommitted write") {
  std::mt19937_64 rng(4);
  std::vector<Bytes> payloads;
  for (int i = 0; i < 30; ++i) payloads.push_back(test::random_payload(rng, 1 + rng() % 600));
  for (long fail_at = 0; fail_at < 60; fail_at += 3) {
    MemoryStorage mem;
    ObservedStorage obs(mem);
    std::size_t committed = 0;
    {
      JournalBackend j(obs, test::fixed_key(), opts(128));
      WalEngine engine(j);
      obs.fail_after(fail_at);
      try {
        for (const auto& p : payloads) {
          engine.append(p, true);
          ++committed;
        }
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kDurabilityError);
      }
    }
    mem.crash();
    obs.fail_after(-1);
    const auto recs = recover_journal(obs, test::fixed_key(), opts(128));
    REQUIRE(recs.size() == committed);
    for (std::size_t i = 0; i < committed; ++i) CHECK(recs[i].payload == test::padded(payloads[i]));
  }
}

TEST_CASE("checkpoints, restart and garbage collection") {
  MemoryStorage mem;
  const auto key = test::fixed_key();
  JournalBackend j(mem, key, opts(128));
  WalEngine engine(j);
  engine.append(Bytes(40, 1), true);
  const auto m1 = engine.checkpoint();
  CHECK(m1.ckpt_id == 1);
  CHECK(mem.exists(kCheckpointFile));
  CHECK(mem.size(kCheckpointFile) == 20u);
  CHECK(j.read_checkpoint() == m1);

  engine.append(Bytes(40, 2), true);
  const auto m2 = engine.checkpoint();
  engine.append(Bytes(40, 3), true);
  CHECK(j.journal_files() == std::vector<std::uint32_t>{1, 2, 3});

  SUBCASE("recovery starts at the checkpoint record") {
    const auto recs = recover_journal(mem, key, opts(128));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].header.is_checkpoint());
    CHECK(get_u64(recs[0].payload.data()) == 2);
    CHECK(recs[1].payload == Bytes(40, 3));
  }
  SUBCASE("gc removes files before the checkpoint file, idempotently") {
    CHECK(j.gc_journal(m2) == 1);
    CHECK(j.journal_files() == std::vector<std::uint32_t>{2, 3});
    CHECK(j.gc_journal(m2) == 0);
    CHECK(recover_journal(mem, key, opts(128)).size() == 2);
  }
  SUBCASE("single active file: nothing to collect") {
    CHECK(j.gc_journal(m1) == 0);
  }
  SUBCASE("a restarted backend continues in a fresh file") {
    JournalBackend again(mem, key, opts(128));
    CHECK(again.file_id() == 4);
    CHECK(again.next_checkpoint_id() == 3);
    WalEngine e2(again);
    e2.append(Bytes(8, 4), true);
    const auto recs = again.recover();
    REQUIRE(recs.size() == 3);
    CHECK(recs[2].payload == Bytes(8, 4));
  }
}

TEST_CASE("failed sidecar write keeps the previous checkpoint valid") {
  MemoryStorage mem;
  ObservedStorage obs(mem);
  const auto key = test::fixed_key();
  JournalBackend j(obs, key, opts(128));
  WalEngine engine(j);
  engine.append(Bytes(12, 1), true);
  const auto m1 = engine.checkpoint();
  engine.append(Bytes(12, 2), true);
  // The checkpoint record's unit is written; the sidecar replacement fails.
  obs.fail_after(1);
  CHECK_THROWS_AS(engine.checkpoint(), Error);
  obs.fail_after(-1);
  mem.crash();
  JournalBackend restarted(obs, key, opts(128));
  CHECK(restarted.read_checkpoint() == m1);
  const auto recs = restarted.recover();
  REQUIRE(recs.size() == 3);
  CHECK(get_u64(recs[0].payload.data()) == 1);
  CHECK(recs[1].payload == Bytes(12, 2));
  CHECK(recs[2].header.is_checkpoint());
}

TEST_CASE("baseline journal modes") {
  std::mt19937_64 rng(6);
  std::vector<Bytes> payloads;
  for (int i = 0; i < 50; ++i) payloads.push_back(test::random_payload(rng, 1 + rng() % 500));
  SUBCASE("unpadded writes each flush as produced") {
    MemoryStorage mem;
    ObservedStorage obs(mem);
    JournalBackend j(obs, test::fixed_key(), opts(128, JournalMode::kUnpadded));
    WalEngine engine(j);
    std::size_t expect = 0;
    for (const auto& p : payloads) {
      engine.append(p, true);
      expect += encoded_record_size(p.size());
    }
    CHECK(obs.bytes_written(kJournalPrefix) == expect);
    CHECK(j.recover().size() == payloads.size());
  }
  SUBCASE("naive pads every flush to the slot capacity") {
    MemoryStorage mem;
    ObservedStorage obs(mem);
    JournalBackend j(obs, test::fixed_key(), opts(128, JournalMode::kNaiveFullSlot));
    WalEngine engine(j);
    for (const auto& p : payloads) engine.append(p, true);
    CHECK(obs.bytes_written(kJournalPrefix) == payloads.size() * kDefaultSlotCapacity);
    const auto recs = j.recover();
    REQUIRE(recs.size() == payloads.size());
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].payload == test::padded(payloads[i]));
  }
}

TEST_CASE("journal on a real directory survives a restart") {
  const auto dir = std::filesystem::temp_directory_path() / "fixwal_journal_test";
  std::filesystem::remove_all(dir);
  const auto key = test::fixed_key();
  std::vector<Bytes> payloads;
  {
    DirectoryStorage storage(dir);
    JournalBackend j(storage, key, opts(64));
    WalEngine engine(j);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 40; ++i) {
      payloads.push_back(test::random_payload(rng, 1 + rng() % 300));
      engine.append(payloads.back(), i % 5 == 4);
    }
    engine.flush();
  }
  DirectoryStorage storage(dir);
  const auto recs = recover_journal(storage, key, opts(64));
  REQUIRE(recs.size() == payloads.size());
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].payload == test::padded(payloads[i]));
  CHECK(payloads_of(recs).size() == 40);
  std::filesystem::remove_all(dir);
}

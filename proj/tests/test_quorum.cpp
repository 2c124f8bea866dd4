#include <doctest.h>

#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "fixwal/error.hpp"
#include "fixwal/quorum.hpp"

using namespace fixwal;

namespace {

std::set<std::uint32_t> ids(std::uint32_t n) {
  std::set<std::uint32_t> out;
  for (std::uint32_t i = 1; i <= n; ++i) out.insert(i);
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kNoData;
}

}  // namespace

TEST_CASE("quorum config") {
  QuorumConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.max_segments() == 8);
  c.max_write_size = 1000;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidConfig);
  c.max_write_size = 1024;
  c.write_quorum = 1;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("segment id packs into 128 little-endian bits") {
  const SegmentId sid{0x01020304, 5, 6, 0};
  const auto b = sid.pack();
  CHECK(b[0] == 0x04);
  CHECK(b[3] == 0x01);
  CHECK(b[4] == 5);
  CHECK(b[8] == 6);
  CHECK(b[12] == 0);
  CHECK(SegmentId::unpack(b) == sid);
}

TEST_CASE("form_quorums") {
  std::mt19937_64 rng(1);
  auto g9 = form_quorums(ids(9), rng);
  CHECK(g9.size() == 3);
  std::set<std::uint32_t> seen;
  for (const auto& g : g9) seen.insert(g.begin(), g.end());
  CHECK(seen == ids(9));

  auto g10 = form_quorums(ids(10), rng);
  CHECK(g10.size() == 3);
  seen.clear();
  for (const auto& g : g10) seen.insert(g.begin(), g.end());
  CHECK(seen.size() == 9);

  std::mt19937_64 a(42);
  std::mt19937_64 b(42);
  CHECK(form_quorums(ids(30), a) == form_quorums(ids(30), b));
  CHECK(code_of([&] { form_quorums(ids(2), rng); }) == ErrorCode::kInsufficientReplicas);
}

TEST_CASE("select_quorums contracts") {
  std::mt19937_64 rng(7);
  SUBCASE("VNOS with k = N selects every quorum") {
    auto p = select_quorums(SelectionScheme::kVnos, 5, 5, 8, rng);
    std::set<std::size_t> q;
    for (const auto& x : p) {
      q.insert(x.quorum);
      CHECK_FALSE(x.fake);
    }
    CHECK(q.size() == 5);
  }
  SUBCASE("FNOS pads with trailing fakes") {
    auto p = select_quorums(SelectionScheme::kFnos, 2, 10, 5, rng);
    REQUIRE(p.size() == 5);
    std::set<std::size_t> q;
    for (std::size_t i = 0; i < p.size(); ++i) {
      q.insert(p[i].quorum);
      CHECK(p[i].fake == (i >= 2));
    }
    CHECK(q.size() == 5);
  }
  SUBCASE("insufficient quorums") {
    CHECK(code_of([&] { select_quorums(SelectionScheme::kVnos, 4, 3, 8, rng); }) ==
          ErrorCode::kInsufficientQuorums);
    CHECK(code_of([&] { select_quorums(SelectionScheme::kFnos, 1, 3, 4, rng); }) ==
          ErrorCode::kInsufficientQuorums);
  }
  SUBCASE("VNOS k=1 N=5 picks each quorum with frequency 1/5") {
    std::vector<int> hits(5, 0);
    constexpr int kTrials = 100000;
    for (int t = 0; t < kTrials; ++t) ++hits[select_quorums(SelectionScheme::kVnos, 1, 5, 8, rng)[0].quorum];
    for (int h : hits) CHECK(std::abs(h / double(kTrials) - 0.2) < 0.01);
  }
  SUBCASE("sample_distinct is uniform over positions") {
    // Each element appears in a 3-subset of 8 with probability 3/8.
    std::vector<int> hits(8, 0);
    constexpr int kTrials = 40000;
    for (int t = 0; t < kTrials; ++t) {
      auto s = sample_distinct(3, 8, rng);
      CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 3);
      for (auto v : s) ++hits[v];
    }
    for (int h : hits) CHECK(std::abs(h / double(kTrials) - 0.375) < 0.015);
  }
}

TEST_CASE("metadata array sentinel semantics") {
  MetadataArray m(3, 4);
  CHECK(m.triplet(0) == std::array<std::int32_t, 3>{-1, -1, -1});
  CHECK(m.sentinel_only(0));
  m.update(0, 0, 11);
  CHECK_FALSE(m.committed(0, 2));
  m.update(0, 2, 13);
  CHECK(m.triplet(0) == std::array<std::int32_t, 3>{11, -1, 13});
  CHECK(m.ack_count(0) == 2);
  CHECK(m.committed(0, 2));
  CHECK_THROWS_AS(m.update(0, 0, 11), std::logic_error);
}

TEST_CASE("metadata arrays serialize to one length") {
  std::mt19937_64 rng(3);
  for (std::size_t k : {1u, 8u, 32u}) {
    std::set<std::size_t> lengths;
    for (int t = 0; t < 20; ++t) {
      MetadataArray m(static_cast<std::uint32_t>(rng()), k);
      for (std::size_t e = 0; e < k; ++e) {
        if (rng() % 2) continue;
        SegmentDigest d;
        for (auto& b : d) b = static_cast<std::uint8_t>(rng());
        m.set_digest(e, d);
        m.update(e, 0, 1);
        m.update(e, 1, 2);
      }
      const Bytes b = m.serialize();
      lengths.insert(b.size());
      CHECK(MetadataArray::parse(b, k) == m);
    }
    CHECK(lengths == std::set<std::size_t>{4 + 44 * k});
  }
}

TEST_CASE("concurrent single-writer updates equal the sequential oracle") {
  constexpr std::size_t kEntries = 3334;  // 10002 owned elements
  MetadataArray concurrent(1, kEntries);
  MetadataArray sequential(1, kEntries);
  auto id_for = [](std::size_t e, std::size_t j) { return static_cast<std::int32_t>(e * 3 + j + 1); };
  for (std::size_t e = 0; e < kEntries; ++e) {
    for (std::size_t j = 0; j < 3; ++j) sequential.update(e, j, id_for(e, j));
  }
  std::vector<std::thread> writers;
  for (std::size_t j = 0; j < 3; ++j) {
    writers.emplace_back([&, j] {
      for (std::size_t e = 0; e < kEntries; ++e) concurrent.update(e, j, id_for(e, j));
    });
  }
  for (auto& w : writers) w.join();
  CHECK(concurrent == sequential);
  CHECK(concurrent.serialize() == sequential.serialize());
}

TEST_CASE("registry leases") {
  Registry r;
  r.register_node(1, 0);
  CHECK(r.list_active(50).count(1) == 1);
  CHECK(r.list_active(90).count(1) == 1);
  CHECK(r.list_active(91).empty());
  CHECK(code_of([&] { r.heartbeat(2, 10); }) == ErrorCode::kUnregistered);
  for (std::int64_t t = 30; t <= 3000; t += Registry::kHeartbeatInterval) {
    r.heartbeat(1, t);
    CHECK(r.is_alive(1, t + 29));
  }
  r.register_node(7, 0, NodeRole::kClient);
  CHECK(r.list_active(0, NodeRole::kClient) == std::set<std::uint32_t>{7});
  CHECK(r.list_active(0, NodeRole::kReplica).count(7) == 0);
  r.deregister(7);
  CHECK_FALSE(r.is_alive(7, 0));
}

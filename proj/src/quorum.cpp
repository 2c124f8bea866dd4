#include "fixwal/quorum.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fixwal/error.hpp"

namespace fixwal {

void QuorumConfig::validate() const {
  SegmentParams{segment_size}.validate();
  if (replicas_per_group != 3) {
    throw Error(ErrorCode::kInvalidConfig, "quorum groups hold exactly 3 replicas");
  }
  if (write_quorum <= tolerated_failures || write_quorum > replicas_per_group) {
    throw Error(ErrorCode::kInvalidConfig, "write quorum must exceed tolerated failures");
  }
  if (read_quorum < 1) throw Error(ErrorCode::kInvalidConfig, "read quorum must be at least 1");
  if (max_write_size == 0 || max_write_size % segment_size != 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "maximum write size must be a positive multiple of the segment size");
  }
}

std::array<std::uint8_t, 16> SegmentId::pack() const {
  std::array<std::uint8_t, 16> out{};
  put_u32(out.data(), fid);
  put_u32(out.data() + 4, ssn);
  put_u32(out.data() + 8, sn);
  put_u32(out.data() + 12, reserved);
  return out;
}

SegmentId SegmentId::unpack(ByteView bytes) {
  if (bytes.size() < 16) throw Error(ErrorCode::kTransportError, "short segment id");
  return {get_u32(bytes.data()), get_u32(bytes.data() + 4), get_u32(bytes.data() + 8),
          get_u32(bytes.data() + 12)};
}

std::size_t SegmentIdHash::operator()(const SegmentId& id) const noexcept {
  std::uint64_t h = (static_cast<std::uint64_t>(id.fid) << 32) ^ id.ssn;
  h = h * 0x9E3779B97F4A7C15ull ^ (static_cast<std::uint64_t>(id.sn) << 16 | id.reserved);
  return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
}

std::vector<QuorumGroup> form_quorums(const std::set<std::uint32_t>& active,
                                      std::mt19937_64& rng) {
  if (active.size() < 3) {
    throw Error(ErrorCode::kInsufficientReplicas,
                std::to_string(active.size()) + " active replicas, need 3");
  }
  std::vector<std::uint32_t> ids(active.begin(), active.end());
  // Fisher-Yates with explicit draws so the grouping depends only on the seed.
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(ids[i], ids[j]);
  }
  std::vector<QuorumGroup> groups(ids.size() / 3);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g] = {ids[3 * g], ids[3 * g + 1], ids[3 * g + 2]};
  }
  return groups;
}

std::vector<std::size_t> sample_distinct(std::size_t k, std::size_t n, std::mt19937_64& rng) {
  // Partial Fisher-Yates over a sparse permutation.
  std::vector<std::size_t> out;
  out.reserve(k);
  std::map<std::size_t, std::size_t> swapped;
  auto at = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::size_t j = pick(rng);
    std::size_t vi = at(i);
    std::size_t vj = at(j);
    swapped[j] = vi;
    swapped[i] = vj;
    out.push_back(vj);
  }
  return out;
}

std::vector<Placement> select_quorums(SelectionScheme scheme, std::size_t n_real,
                                      std::size_t n_quorums, std::size_t max_segments,
                                      std::mt19937_64& rng) {
  const std::size_t draws = scheme == SelectionScheme::kVnos ? n_real : max_segments;
  if (scheme == SelectionScheme::kFnos && n_real > max_segments) {
    throw Error(ErrorCode::kInvalidConfig, std::to_string(n_real) +
                                               " segments exceed the per-write maximum of " +
                                               std::to_string(max_segments));
  }
  if (draws > n_quorums) {
    throw Error(ErrorCode::kInsufficientQuorums, "need " + std::to_string(draws) +
                                                     " quorums, have " +
                                                     std::to_string(n_quorums));
  }
  std::vector<Placement> out;
  out.reserve(draws);
  auto picks = sample_distinct(draws, n_quorums, rng);
  for (std::size_t i = 0; i < picks.size(); ++i) out.push_back({picks[i], i >= n_real});
  return out;
}

MetadataArray::MetadataArray(std::uint32_t ssn, std::size_t max_segments)
    : ssn_(ssn), count_(max_segments), entries_(std::make_unique<Entry[]>(max_segments)) {}

void MetadataArray::set_digest(std::size_t entry, const SegmentDigest& digest) {
  entries_[entry].digest = digest;
}

void MetadataArray::update(std::size_t entry, std::size_t element, std::int32_t replica_id) {
  if (entry >= count_ || element >= 3) throw std::out_of_range("metadata element");
  auto& slot = entries_[entry].triplet[element];
  // Single writer per element: a relaxed check-then-store cannot race.
  if (slot.load(std::memory_order_relaxed) != kNoAck) {
    throw std::logic_error("metadata element " + std::to_string(entry) + "/" +
                           std::to_string(element) + " updated twice");
  }
  slot.store(replica_id, std::memory_order_release);
}

std::int32_t MetadataArray::element(std::size_t entry, std::size_t element) const {
  return entries_[entry].triplet[element].load(std::memory_order_acquire);
}

std::array<std::int32_t, 3> MetadataArray::triplet(std::size_t entry) const {
  return {element(entry, 0), element(entry, 1), element(entry, 2)};
}

std::size_t MetadataArray::ack_count(std::size_t entry) const {
  auto t = triplet(entry);
  return static_cast<std::size_t>(std::count_if(t.begin(), t.end(),
                                                [](std::int32_t v) { return v != kNoAck; }));
}

bool MetadataArray::committed(std::size_t entry, std::size_t write_quorum) const {
  return ack_count(entry) >= write_quorum;
}

Bytes MetadataArray::serialize() const {
  Bytes out;
  out.reserve(serialized_size(count_));
  append_u32(out, ssn_);
  for (std::size_t i = 0; i < count_; ++i) {
    for (auto id : triplet(i)) append_u32(out, static_cast<std::uint32_t>(id));
    append_bytes(out, entries_[i].digest);
  }
  return out;
}

MetadataArray MetadataArray::parse(ByteView bytes, std::size_t max_segments) {
  if (bytes.size() < serialized_size(max_segments)) {
    throw Error(ErrorCode::kRecoveryCorruption, "short metadata array");
  }
  MetadataArray out(get_u32(bytes.data()), max_segments);
  const std::uint8_t* p = bytes.data() + 4;
  for (std::size_t i = 0; i < max_segments; ++i, p += 44) {
    for (std::size_t j = 0; j < 3; ++j) {
      out.entries_[i].triplet[j].store(static_cast<std::int32_t>(get_u32(p + 4 * j)));
    }
    std::copy_n(p + 12, kDigestSize, out.entries_[i].digest.begin());
  }
  return out;
}

bool MetadataArray::operator==(const MetadataArray& other) const {
  return serialize() == other.serialize();
}

void Registry::register_node(std::uint32_t id, std::int64_t t, NodeRole role) {
  std::lock_guard lock(mu_);
  leases_[id] = {role, t};
}

void Registry::deregister(std::uint32_t id) {
  std::lock_guard lock(mu_);
  leases_.erase(id);
}

void Registry::heartbeat(std::uint32_t id, std::int64_t t) {
  std::lock_guard lock(mu_);
  auto it = leases_.find(id);
  if (it == leases_.end()) throw Error(ErrorCode::kUnregistered, "node " + std::to_string(id));
  it->second.last_heartbeat = std::max(it->second.last_heartbeat, t);
}

std::set<std::uint32_t> Registry::list_active(std::int64_t t, NodeRole role) const {
  std::lock_guard lock(mu_);
  std::set<std::uint32_t> out;
  for (const auto& [id, lease] : leases_) {
    if (lease.role == role && t - lease.last_heartbeat <= kEvictionHorizon) out.insert(id);
  }
  return out;
}

bool Registry::is_alive(std::uint32_t id, std::int64_t t) const {
  std::lock_guard lock(mu_);
  auto it = leases_.find(id);
  return it != leases_.end() && t - it->second.last_heartbeat <= kEvictionHorizon;
}

}  // namespace fixwal

#include "fixwal/journal.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "fixwal/error.hpp"

namespace fixwal {

std::string journal_file_name(std::uint32_t fid) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%010u", kJournalPrefix, fid);
  return buf;
}

std::optional<std::uint32_t> parse_journal_file_name(const std::string& name) {
  const std::string_view prefix(kJournalPrefix);
  if (name.size() != prefix.size() + 10 || name.compare(0, prefix.size(), prefix) != 0) {
    return std::nullopt;
  }
  std::uint32_t fid = 0;
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, fid);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return fid;
}

Bytes encode_checkpoint_sidecar(const CheckpointMarker& marker) {
  Bytes out;
  out.reserve(kCheckpointSidecarSize);
  append_u64(out, marker.ckpt_id);
  append_u32(out, marker.lsn.file_id);
  append_u64(out, marker.lsn.offset);
  return out;
}

CheckpointMarker decode_checkpoint_sidecar(ByteView bytes) {
  if (bytes.size() != kCheckpointSidecarSize) {
    throw Error(ErrorCode::kRecoveryCorruption,
                "checkpoint sidecar has " + std::to_string(bytes.size()) + " bytes");
  }
  CheckpointMarker m;
  m.ckpt_id = get_u64(bytes.data());
  m.lsn.file_id = get_u32(bytes.data() + 8);
  m.lsn.offset = get_u64(bytes.data() + 12);
  return m;
}

std::vector<LogRecord> scan_records(ByteView plaintext, const std::string& origin) {
  std::vector<LogRecord> out;
  ByteCursor cursor(plaintext.first(plaintext.size() / 4 * 4));
  while (!cursor.at_end()) {
    const std::uint32_t word = cursor.peek_u32();
    if (word == 0) {
      cursor.advance(4);
      continue;
    }
    if (!plausible_length(word)) {
      throw Error(ErrorCode::kRecoveryCorruption,
                  origin + ": invalid record length " + std::to_string(word) + " at offset " +
                      std::to_string(cursor.position()));
    }
    try {
      out.push_back(decode_record(cursor));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTruncatedRecord || e.code() == ErrorCode::kCorruptRecord) break;
      throw;
    }
  }
  return out;
}

JournalBackend::JournalBackend(Storage& storage, ReplicaKey key, JournalOptions options)
    : storage_(storage), key_(std::move(key)), options_(options) {
  SegmentParams{options_.segment_size}.validate(options_.slot_capacity);
  auto files = journal_files();
  if (!files.empty()) fid_ = files.back() + 1;
  if (auto marker = read_checkpoint()) {
    last_ckpt_id_ = marker->ckpt_id;
    fid_ = std::max(fid_, marker->lsn.file_id + 1);
  }
}

std::vector<std::uint32_t> JournalBackend::journal_files() const {
  std::vector<std::uint32_t> out;
  for (const auto& name : storage_.list()) {
    if (auto fid = parse_journal_file_name(name)) out.push_back(*fid);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<CheckpointMarker> JournalBackend::read_checkpoint() const {
  if (!storage_.exists(kCheckpointFile)) return std::nullopt;
  return decode_checkpoint_sidecar(storage_.read(kCheckpointFile));
}

Lsn JournalBackend::append_segments(const std::vector<Segment>& segments) {
  const Lsn first{fid_, append_offset_};
  if (segments.empty()) return first;
  const std::string name = journal_file_name(fid_);
  auto units = options_.parallel_crypto ? encrypt_segments(key_, segments)
                                        : encrypt_segments_serial(key_, segments);
  for (const auto& unit : units) storage_.append(name, unit);
  storage_.sync(name);
  append_offset_ += units.size() * unit_size();
  return first;
}

void JournalBackend::persist(ByteView slot_bytes, std::uint32_t /*ssn*/) {
  if (slot_bytes.empty()) return;
  const std::string name = journal_file_name(fid_);
  switch (options_.mode) {
    case JournalMode::kSegmented:
      append_segments(segment_slot(slot_bytes, options_.segment_size));
      return;
    case JournalMode::kUnpadded:
      storage_.append(name, slot_bytes);
      storage_.sync(name);
      append_offset_ += slot_bytes.size();
      return;
    case JournalMode::kNaiveFullSlot: {
      Bytes padded(round_up(slot_bytes.size(), options_.slot_capacity), 0);
      std::copy(slot_bytes.begin(), slot_bytes.end(), padded.begin());
      storage_.append(name, padded);
      storage_.sync(name);
      append_offset_ += padded.size();
      return;
    }
  }
}

Lsn JournalBackend::position() const { return {fid_, append_offset_}; }

std::uint64_t JournalBackend::next_checkpoint_id() const { return last_ckpt_id_ + 1; }

void JournalBackend::commit_checkpoint(const CheckpointMarker& marker) {
  if (marker.ckpt_id <= last_ckpt_id_) {
    throw Error(ErrorCode::kInvalidConfig, "checkpoint ids must increase");
  }
  storage_.write_atomic(kCheckpointFile, encode_checkpoint_sidecar(marker));
  last_ckpt_id_ = marker.ckpt_id;
  ++fid_;
  append_offset_ = 0;
}

std::size_t JournalBackend::gc_journal(const CheckpointMarker& current) {
  std::size_t deleted = 0;
  for (auto fid : journal_files()) {
    if (fid >= current.lsn.file_id) break;
    if (storage_.remove(journal_file_name(fid))) ++deleted;
  }
  return deleted;
}

std::vector<std::pair<std::uint32_t, Bytes>> JournalBackend::read_plaintext() const {
  std::vector<std::pair<std::uint32_t, Bytes>> out;
  const auto marker = read_checkpoint();
  for (auto fid : journal_files()) {
    std::uint64_t start = 0;
    if (marker) {
      if (fid < marker->lsn.file_id) continue;
      if (fid == marker->lsn.file_id) start = marker->lsn.offset;
    }
    Bytes raw = storage_.read(journal_file_name(fid));
    if (start >= raw.size()) {
      out.emplace_back(fid, Bytes{});
      continue;
    }
    ByteView data = ByteView(raw).subspan(start);
    if (options_.mode == JournalMode::kSegmented) {
      // A partially written final unit is ignored.
      data = data.first(data.size() / unit_size() * unit_size());
      out.emplace_back(fid, options_.parallel_crypto
                                ? decrypt_units(key_, data, options_.segment_size)
                                : decrypt_units_serial(key_, data, options_.segment_size));
    } else {
      out.emplace_back(fid, Bytes(data.begin(), data.end()));
    }
  }
  return out;
}

std::vector<LogRecord> JournalBackend::recover() {
  std::vector<LogRecord> out;
  for (auto& [fid, plain] : read_plaintext()) {
    auto records = scan_records(plain, journal_file_name(fid));
    std::move(records.begin(), records.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<LogRecord> recover_journal(Storage& storage, const ReplicaKey& key,
                                       const JournalOptions& options) {
  JournalBackend backend(storage, key, options);
  return backend.recover();
}

}  // namespace fixwal

#pragma once

#include <compare>
#include <cstdint>

#include "fixwal/bytes.hpp"

namespace fixwal {

inline constexpr std::size_t kRecordHeaderSize = 16;
inline constexpr std::uint64_t kMaxPayloadSize = 0xFFFFFFFFull - 17;

namespace record_flags {
inline constexpr std::uint32_t kCheckpoint = 1u << 0;
}

std::uint32_t crc32c(ByteView data);

// On-disk layout, little-endian: len | checksum | flags | reserved.
struct RecordHeader {
  std::uint32_t len = 0;
  std::uint32_t checksum = 0;
  std::uint32_t flags = 0;
  std::uint32_t reserved = 0;

  bool is_checkpoint() const { return (flags & record_flags::kCheckpoint) != 0; }
  bool operator==(const RecordHeader&) const = default;
};

struct LogRecord {
  RecordHeader header;
  Bytes payload;  // zero-padded to a multiple of 4

  bool operator==(const LogRecord&) const = default;
};

struct Lsn {
  std::uint32_t file_id = 0;
  std::uint64_t offset = 0;

  auto operator<=>(const Lsn&) const = default;
};

// Encoded size for a payload of the given length.
constexpr std::size_t encoded_record_size(std::size_t payload_len) {
  return kRecordHeaderSize + round_up(payload_len, 4);
}

Bytes encode_record(ByteView payload, std::uint32_t flags = 0);

// Forward-only reader over a byte stream.
class ByteCursor {
 public:
  explicit ByteCursor(ByteView data) : data_(data) {}

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ >= data_.size(); }
  ByteView rest() const { return data_.subspan(pos_); }
  void advance(std::size_t n) { pos_ += n; }
  // Reads the little-endian word at the cursor without consuming it.
  std::uint32_t peek_u32() const { return get_u32(data_.data() + pos_); }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

RecordHeader parse_header(ByteView bytes);
bool plausible_length(std::uint32_t len);

// Decodes the record at the cursor and advances past it.
LogRecord decode_record(ByteCursor& cursor);

// Parses a gap-free concatenation of records (no padding allowed).
std::vector<LogRecord> parse_records(ByteView stream);

}  // namespace fixwal

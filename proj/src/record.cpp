#include "fixwal/record.hpp"

#include <boost/crc.hpp>
#include <string>

#include "fixwal/error.hpp"

namespace fixwal {

std::uint32_t crc32c(ByteView data) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

Bytes encode_record(ByteView payload, std::uint32_t flags) {
  if (payload.size() > kMaxPayloadSize) {
    throw Error(ErrorCode::kRecordTooLarge,
                "payload of " + std::to_string(payload.size()) + " bytes");
  }
  const std::size_t total = encoded_record_size(payload.size());
  Bytes out(total, 0);
  std::memcpy(out.data() + kRecordHeaderSize, payload.data(), payload.size());
  ByteView padded(out.data() + kRecordHeaderSize, total - kRecordHeaderSize);
  put_u32(out.data(), static_cast<std::uint32_t>(total));
  put_u32(out.data() + 4, crc32c(padded));
  put_u32(out.data() + 8, flags);
  put_u32(out.data() + 12, 0);
  return out;
}

RecordHeader parse_header(ByteView bytes) {
  RecordHeader h;
  h.len = get_u32(bytes.data());
  h.checksum = get_u32(bytes.data() + 4);
  h.flags = get_u32(bytes.data() + 8);
  h.reserved = get_u32(bytes.data() + 12);
  return h;
}

bool plausible_length(std::uint32_t len) { return len >= kRecordHeaderSize && len % 4 == 0; }

LogRecord decode_record(ByteCursor& cursor) {
  if (cursor.remaining() < 4) {
    throw Error(ErrorCode::kTruncatedRecord, "no room for a length word at offset " +
                                                 std::to_string(cursor.position()));
  }
  const std::uint32_t len = cursor.peek_u32();
  if (!plausible_length(len)) {
    throw Error(ErrorCode::kMalformedHeader, "length " + std::to_string(len) + " at offset " +
                                                 std::to_string(cursor.position()));
  }
  if (cursor.remaining() < len) {
    throw Error(ErrorCode::kTruncatedRecord,
                "declared " + std::to_string(len) + " bytes, " +
                    std::to_string(cursor.remaining()) + " remain");
  }
  ByteView bytes = cursor.rest().first(len);
  LogRecord rec;
  rec.header = parse_header(bytes);
  rec.payload.assign(bytes.begin() + kRecordHeaderSize, bytes.end());
  if (crc32c(rec.payload) != rec.header.checksum) {
    throw Error(ErrorCode::kCorruptRecord,
                "checksum mismatch at offset " + std::to_string(cursor.position()));
  }
  cursor.advance(len);
  return rec;
}

std::vector<LogRecord> parse_records(ByteView stream) {
  std::vector<LogRecord> out;
  ByteCursor cursor(stream);
  while (!cursor.at_end()) out.push_back(decode_record(cursor));
  return out;
}

}  // namespace fixwal

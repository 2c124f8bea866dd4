#include "fixwal/segmentation.hpp"

#include <algorithm>
#include <string>

#include "fixwal/error.hpp"

namespace fixwal {

void SegmentParams::validate(std::size_t slot_capacity) const {
  if (segment_size % 16 != 0 || segment_size < 32) {
    throw Error(ErrorCode::kInvalidSegmentSize,
                "segment size " + std::to_string(segment_size) +
                    " must be a multiple of 16 and at least 32");
  }
  if (slot_capacity != 0 && segment_size > slot_capacity) {
    throw Error(ErrorCode::kInvalidSegmentSize,
                "segment size " + std::to_string(segment_size) + " exceeds slot capacity " +
                    std::to_string(slot_capacity));
  }
}

std::vector<Segment> segment_slot(ByteView slot_bytes, std::size_t segment_size) {
  SegmentParams{segment_size}.validate();
  const std::size_t n = segment_count(slot_bytes.size(), segment_size);
  std::vector<Segment> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = i * segment_size;
    const std::size_t take = std::min(segment_size, slot_bytes.size() - begin);
    Segment seg(segment_size, 0);
    std::copy_n(slot_bytes.begin() + static_cast<std::ptrdiff_t>(begin), take, seg.begin());
    out.push_back(std::move(seg));
  }
  return out;
}

std::size_t padding_overhead(std::size_t len, std::size_t segment_size) {
  return segment_count(len, segment_size) * segment_size - len;
}

}  // namespace fixwal

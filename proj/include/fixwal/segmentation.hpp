#pragma once

#include <cstddef>
#include <vector>

#include "fixwal/bytes.hpp"

namespace fixwal {

inline constexpr std::size_t kDefaultSegmentSize = 128;

// A segment always holds exactly segment_size bytes.
using Segment = Bytes;

struct SegmentParams {
  std::size_t segment_size = kDefaultSegmentSize;

  // Throws InvalidSegmentSize unless size % 16 == 0, size >= 32 and, when
  // slot_capacity is non-zero, size <= slot_capacity.
  void validate(std::size_t slot_capacity = 0) const;
};

// Splits a flushed slot into fixed-size segments, zero-padding the last one.
// An input that is an exact multiple of the segment size gets no padding segment.
std::vector<Segment> segment_slot(ByteView slot_bytes, std::size_t segment_size);

std::size_t padding_overhead(std::size_t len, std::size_t segment_size);

inline std::size_t segment_count(std::size_t len, std::size_t segment_size) {
  return div_ceil(len, segment_size);
}

}  // namespace fixwal

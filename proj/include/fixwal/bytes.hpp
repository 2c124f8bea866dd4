#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace fixwal {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline void put_u32(std::uint8_t* dst, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline void put_u64(std::uint8_t* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
inline std::uint32_t get_u32(const std::uint8_t* src) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | src[i];
  return v;
}
inline std::uint64_t get_u64(const std::uint8_t* src) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | src[i];
  return v;
}

inline void append_u32(Bytes& out, std::uint32_t v) {
  auto n = out.size();
  out.resize(n + 4);
  put_u32(out.data() + n, v);
}
inline void append_u64(Bytes& out, std::uint64_t v) {
  auto n = out.size();
  out.resize(n + 8);
  put_u64(out.data() + n, v);
}
inline void append_bytes(Bytes& out, ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

constexpr std::size_t round_up(std::size_t n, std::size_t multiple) {
  return (n + multiple - 1) / multiple * multiple;
}

constexpr std::size_t div_ceil(std::size_t n, std::size_t d) { return (n + d - 1) / d; }

}  // namespace fixwal

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "pkgm/common.hpp"

namespace pkgm::binary {

// Fixed little-endian encoding regardless of host byte order.
inline void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes, 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw Error("unexpected end of binary data");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[i]} << (8 * i);
  return v;
}

inline void write_floats(std::ostream& out, std::span<const float> values) {
  for (float x : values) write_u32(out, std::bit_cast<std::uint32_t>(x));
}

inline void read_floats(std::istream& in, std::span<float> values) {
  for (float& x : values) x = std::bit_cast<float>(read_u32(in));
}

}  // namespace pkgm::binary

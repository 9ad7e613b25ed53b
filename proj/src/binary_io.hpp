#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace agtm::detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline bool try_get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
      static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  return true;
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!try_get_u32(in, v)) throw std::runtime_error(std::string("truncated file reading ") + what);
  return v;
}

inline double get_f32(std::istream& in, const char* what) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, what)));
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw std::length_error(std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace agtm::detail

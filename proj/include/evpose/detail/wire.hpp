#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace evpose::detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8),
                       std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in) {
  std::uint8_t b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void put_f64s(std::ofstream& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

inline void get_f64s(std::ifstream& in, std::vector<double>& v) {
  for (double& d : v) {
    std::uint8_t b[8] = {};
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    std::memcpy(&d, &bits, 8);
  }
}

}  // namespace evpose::detail

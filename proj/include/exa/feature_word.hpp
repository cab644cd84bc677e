#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exa/bitstream.hpp"
#include "exa/bytes.hpp"

namespace exa {

// Per-vertex attributes packed as shape[15:9] partition[8:6] ao[5:0].
struct VertexAttributes {
  std::uint8_t shape = 0;      // 0 = flat, 1..126
  std::uint8_t partition = 0;  // 0 = boundary, 1..7
  std::uint8_t ao = 63;        // 0 = occluded, 63 = open
  bool operator==(const VertexAttributes&) const = default;
};

inline std::uint16_t pack_feature(const VertexAttributes& a) {
  if (a.shape > 126) throw std::invalid_argument("shape code exceeds 7-bit range");
  if (a.partition > 7) throw std::invalid_argument("partition exceeds 3-bit range");
  if (a.ao > 63) throw std::invalid_argument("ao exceeds 6-bit range");
  return static_cast<std::uint16_t>((a.shape << 9) | (a.partition << 6) | a.ao);
}

inline VertexAttributes unpack_feature(std::uint16_t w) {
  return {static_cast<std::uint8_t>(w >> 9), static_cast<std::uint8_t>((w >> 6) & 7u), static_cast<std::uint8_t>(w & 63u)};
}

inline std::uint8_t quantize_ao(double ao) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(ao, 0.0, 1.0) * 63.0));
}
inline double dequantize_ao(std::uint8_t q) { return q / 63.0; }

// FEAT section: u64 count, then one little-endian u16 per vertex.
inline std::vector<std::uint8_t> pack_features(const std::vector<VertexAttributes>& attrs) {
  ByteWriter w;
  w.u64(attrs.size());
  for (const auto& a : attrs) w.u16(pack_feature(a));
  return w.take();
}

inline std::vector<VertexAttributes> unpack_features(const std::vector<std::uint8_t>& section) {
  ByteReader r(section);
  const std::uint64_t n = r.u64();
  if (n * 2 > r.remaining()) throw StreamError("feature section truncated");
  std::vector<VertexAttributes> out(n);
  for (auto& a : out) a = unpack_feature(r.u16());
  return out;
}

// AOCC section: u64 count, then 6-bit occlusion codes, MSB-first.
inline std::vector<std::uint8_t> pack_ao(const std::vector<std::uint8_t>& ao) {
  ByteWriter w;
  w.u64(ao.size());
  BitWriter b;
  for (auto q : ao) {
    if (q > 63) throw std::invalid_argument("ao exceeds 6-bit range");
    b.put_bits(q, 6);
  }
  w.bytes(b.bytes());
  return w.take();
}

inline std::vector<std::uint8_t> unpack_ao(const std::vector<std::uint8_t>& section) {
  ByteReader r(section);
  const std::uint64_t n = r.u64();
  BitReader b(section.data() + r.position(), r.remaining());
  std::vector<std::uint8_t> out(n);
  for (auto& q : out) q = static_cast<std::uint8_t>(b.get_bits(6));
  return out;
}

}  // namespace exa

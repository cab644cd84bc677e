#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exa/bitstream.hpp"
#include "exa/bytes.hpp"
#include "exa/mesh.hpp"
#include "exa/parallel.hpp"

namespace exa {

inline std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}
inline std::int64_t unzigzag(std::uint64_t u) { return static_cast<std::int64_t>(u >> 1) ^ -static_cast<std::int64_t>(u & 1); }

// Word-aligned packing in the Simple8b family. Each word holds a selector
// and as many equal-width codes as fit. Width 0 stands for a run of zeros.
struct PackingLadder {
  int word_bits;      // 64 or 128
  int selector_bits;  // 4 or 8
  std::vector<int> widths;
  int zero_run;       // values covered by a width-0 word

  int payload_bits() const { return word_bits - selector_bits; }
  int count(int sel) const { return widths[sel] == 0 ? zero_run : payload_bits() / widths[sel]; }
};

inline const PackingLadder& ladder64() {
  static const PackingLadder l{64, 4, {0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 15, 20, 30, 60}, 120};
  return l;
}

inline const PackingLadder& ladder128() {
  static const PackingLadder l = [] {
    PackingLadder x{128, 8, {}, 240};
    for (int w = 0; w <= 40; ++w) x.widths.push_back(w);
    return x;
  }();
  return l;
}

using Word128 = unsigned __int128;

inline constexpr std::size_t kPackBlock = 4096;

namespace detail {

inline bool fits(std::uint64_t v, int w) { return w >= 64 || (v >> w) == 0; }

// Greedy packing of one block into words (stored as 128-bit regardless of ladder).
inline std::vector<Word128> pack_block(const PackingLadder& L, const std::uint64_t* v, std::size_t n) {
  std::vector<Word128> out;
  std::size_t i = 0;
  while (i < n) {
    int chosen = -1;
    for (int s = 0; s < static_cast<int>(L.widths.size()); ++s) {
      const std::size_t take = std::min<std::size_t>(L.count(s), n - i);
      bool ok = true;
      for (std::size_t k = 0; k < take && ok; ++k) ok = fits(v[i + k], L.widths[s]);
      if (ok) {
        chosen = s;
        break;
      }
    }
    if (chosen < 0) throw std::invalid_argument("value exceeds the widest packing code");
    const int w = L.widths[chosen];
    const std::size_t take = std::min<std::size_t>(L.count(chosen), n - i);
    Word128 word = static_cast<Word128>(chosen) << L.payload_bits();
    if (w > 0) {
      int shift = L.payload_bits();
      for (std::size_t k = 0; k < take; ++k) {
        shift -= w;
        word |= static_cast<Word128>(v[i + k]) << shift;
      }
    }
    out.push_back(word);
    i += take;
  }
  return out;
}

}  // namespace detail

// Packs values in fixed blocks; blocks are independent, so the output does
// not depend on the worker count.
inline std::vector<std::uint8_t> pack_values(const PackingLadder& L, const std::vector<std::uint64_t>& values) {
  const std::size_t nb = (values.size() + kPackBlock - 1) / kPackBlock;
  std::vector<std::vector<Word128>> blocks(nb);
  parallel_blocks(static_cast<std::int64_t>(values.size()), kPackBlock, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    blocks[b] = detail::pack_block(L, values.data() + lo, static_cast<std::size_t>(hi - lo));
  });
  ByteWriter w;
  for (const auto& blk : blocks)
    for (Word128 word : blk) {
      w.u64(static_cast<std::uint64_t>(word));
      if (L.word_bits == 128) w.u64(static_cast<std::uint64_t>(word >> 64));
    }
  return w.take();
}

inline std::vector<std::uint64_t> unpack_values(const PackingLadder& L, ByteReader& r, std::size_t count) {
  std::vector<std::uint64_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t block_end = std::min(count, (out.size() / kPackBlock + 1) * kPackBlock);
    Word128 word = r.u64();
    if (L.word_bits == 128) word |= static_cast<Word128>(r.u64()) << 64;
    const std::uint64_t sel = static_cast<std::uint64_t>(word >> L.payload_bits());
    if (sel >= L.widths.size()) throw StreamError("packing selector out of range");
    const int w = L.widths[sel];
    const std::size_t take = std::min<std::size_t>(L.count(static_cast<int>(sel)), block_end - out.size());
    if (w == 0) {
      out.insert(out.end(), take, 0);
      continue;
    }
    const Word128 mask = (static_cast<Word128>(1) << w) - 1;
    int shift = L.payload_bits();
    for (std::size_t k = 0; k < take; ++k) {
      shift -= w;
      out.push_back(static_cast<std::uint64_t>((word >> shift) & mask));
    }
  }
  return out;
}

struct DeltaSection {
  std::uint64_t count = 0;  // number of vertices
  double step = 0;          // quantization step
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    w.u64(count);
    w.f64(step);
    w.bytes(payload);
    return w.take();
  }
  static DeltaSection parse(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    DeltaSection s;
    s.count = r.u64();
    s.step = r.f64();
    s.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.position()), bytes.end());
    return s;
  }
  double bits_per_vertex() const { return count ? payload.size() * 8.0 / count : 0.0; }
};

inline constexpr double kDefaultPosStep = 1.0 / 128.0;
inline constexpr double kDefaultNrmStep = 1.0 / 512.0;

namespace detail {

inline DeltaSection encode_deltas(const PackingLadder& L, const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                                  double step) {
  if (from.size() != to.size()) throw std::invalid_argument("vertex count mismatch");
  if (!(step > 0)) throw std::invalid_argument("quantization step must be > 0");
  std::vector<std::uint64_t> vals(from.size() * 3);
  parallel_for(0, static_cast<std::int64_t>(from.size()), [&](std::int64_t i) {
    for (int k = 0; k < 3; ++k)
      vals[3 * i + k] = zigzag(static_cast<std::int64_t>(std::llround((to[i][k] - from[i][k]) / step)));
  });
  DeltaSection s;
  s.count = from.size();
  s.step = step;
  s.payload = pack_values(L, vals);
  return s;
}

inline std::vector<Vec3> decode_deltas(const PackingLadder& L, const std::vector<Vec3>& from, const DeltaSection& s) {
  if (s.count != from.size()) throw std::invalid_argument("vertex count mismatch");
  ByteReader r(s.payload);
  auto vals = unpack_values(L, r, from.size() * 3);
  std::vector<Vec3> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i)
    for (int k = 0; k < 3; ++k) out[i][k] = from[i][k] + static_cast<double>(unzigzag(vals[3 * i + k])) * s.step;
  return out;
}

}  // namespace detail

struct VertexDeltas {
  DeltaSection positions;  // 64-bit words
  DeltaSection normals;    // 128-bit words
};

inline VertexDeltas encode_vertex_deltas(const std::vector<Vec3>& initial_pos, const std::vector<Vec3>& initial_nrm,
                                         const std::vector<Vec3>& final_pos, const std::vector<Vec3>& final_nrm,
                                         double q_pos = kDefaultPosStep, double q_nrm = kDefaultNrmStep) {
  return {detail::encode_deltas(ladder64(), initial_pos, final_pos, q_pos),
          detail::encode_deltas(ladder128(), initial_nrm, final_nrm, q_nrm)};
}

// Reconstructs positions and (renormalized) normals.
inline std::pair<std::vector<Vec3>, std::vector<Vec3>> decode_vertex_deltas(const std::vector<Vec3>& initial_pos,
                                                                            const std::vector<Vec3>& initial_nrm,
                                                                            const VertexDeltas& d) {
  auto pos = detail::decode_deltas(ladder64(), initial_pos, d.positions);
  auto nrm = detail::decode_deltas(ladder128(), initial_nrm, d.normals);
  for (auto& n : nrm) {
    const double len = n.norm();
    if (len > 0) n /= len;
  }
  return {std::move(pos), std::move(nrm)};
}

}  // namespace exa

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "exa/bitstream.hpp"
#include "exa/code_table.hpp"
#include "exa/contour.hpp"
#include "exa/parallel.hpp"

namespace exa {

// Octree coding of a sign grid.
//
// The grid is embedded in a cube of N = 2^K cells per axis; points past the
// volume repeat the last real point (clamp). Lattice points at index N exist
// only as contexts and take the value of the lattice point one step below.
//
// Level L (node size s = 2^L) runs from K down to 1. Each node owns the 7
// lattice points of spacing s/2 inside its lower child cube apart from its own
// lower corner. A node is coded when its 8 corners disagree or when it is an
// exception (uniform corners, mixed content). Coded nodes send the 8 signs of
// their lower child cube, ranked against the 8 corner signs as context. All
// other nodes fill their owned points with the uniform corner sign.
//
// Stream: root sign bit; then per level: gamma(exceptions + 1), exception
// Morton indices in 3(K - L) bits each, then one gamma(rank + 1) per coded node
// in Morton order.
namespace octree {

inline std::uint64_t morton_encode(std::uint32_t i, std::uint32_t j, std::uint32_t k, int bits) {
  std::uint64_t m = 0;
  for (int b = 0; b < bits; ++b) {
    m |= static_cast<std::uint64_t>((i >> b) & 1u) << (3 * b);
    m |= static_cast<std::uint64_t>((j >> b) & 1u) << (3 * b + 1);
    m |= static_cast<std::uint64_t>((k >> b) & 1u) << (3 * b + 2);
  }
  return m;
}

inline void morton_decode(std::uint64_t m, int bits, std::uint32_t& i, std::uint32_t& j, std::uint32_t& k) {
  i = j = k = 0;
  for (int b = 0; b < bits; ++b) {
    i |= static_cast<std::uint32_t>((m >> (3 * b)) & 1u) << b;
    j |= static_cast<std::uint32_t>((m >> (3 * b + 1)) & 1u) << b;
    k |= static_cast<std::uint32_t>((m >> (3 * b + 2)) & 1u) << b;
  }
}

inline int cube_exponent(const Dims& d) {
  const std::size_t n = std::max({d.nx, d.ny, d.nz, std::size_t{2}});
  return std::bit_width(std::bit_ceil(n)) - 1;
}

// Sign lookup over the padded cube [0, N)^3.
struct PaddedSigns {
  const SignGrid* grid;
  std::uint32_t lim[3];

  explicit PaddedSigns(const SignGrid& g)
      : grid(&g),
        lim{static_cast<std::uint32_t>(g.dims().nx - 1), static_cast<std::uint32_t>(g.dims().ny - 1),
            static_cast<std::uint32_t>(g.dims().nz - 1)} {}

  bool operator()(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    return grid->get(std::min(x, lim[0]), std::min(y, lim[1]), std::min(z, lim[2]));
  }
};

// Dense bit set over the padded cube, used by the decoder.
struct CubeBits {
  std::uint32_t n = 0;
  std::vector<std::uint64_t> w;
  explicit CubeBits(std::uint32_t n_) : n(n_), w((static_cast<std::uint64_t>(n_) * n_ * n_ + 63) / 64, 0) {}
  std::uint64_t idx(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    return (static_cast<std::uint64_t>(z) * n + y) * n + x;
  }
  bool operator()(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    const auto i = idx(x, y, z);
    return (w[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::uint32_t x, std::uint32_t y, std::uint32_t z, bool v) {
    const auto i = idx(x, y, z);
    if (v) w[i >> 6] |= std::uint64_t{1} << (i & 63);
    else w[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
  }
};

// Lattice value at spacing s; index N maps to N - s.
template <typename Signs>
inline bool lattice(const Signs& sg, std::uint32_t N, std::uint32_t s, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  return sg(x == N ? N - s : x, y == N ? N - s : y, z == N ? N - s : z);
}

template <typename Signs>
inline std::uint8_t corner_pattern(const Signs& sg, std::uint32_t N, std::uint32_t s, std::uint32_t x0,
                                   std::uint32_t y0, std::uint32_t z0) {
  std::uint8_t p = 0;
  for (int k = 0; k < 8; ++k)
    if (lattice(sg, N, s, x0 + (k & 1) * s, y0 + ((k >> 1) & 1) * s, z0 + ((k >> 2) & 1) * s))
      p |= static_cast<std::uint8_t>(1u << k);
  return p;
}

// Mixed-content flags per level, over closed node cubes clipped to N - 1.
class MixedPyramid {
 public:
  MixedPyramid(const PaddedSigns& sg, int K) : K_(K), levels_(K + 1) {
    const std::uint32_t N = 1u << K;
    for (int L = 1; L <= K; ++L) {
      const std::uint64_t M = N >> L;
      levels_[L].assign((M * M * M + 63) / 64, 0);
    }
    // Level 1 directly from the 27 points of each node.
    {
      const std::uint32_t M = N >> 1;
      auto& bits = levels_[1];
      parallel_for(0, static_cast<std::int64_t>((static_cast<std::uint64_t>(M) * M * M + 63) / 64), [&](std::int64_t wi) {
        std::uint64_t word = 0;
        for (int b = 0; b < 64; ++b) {
          const std::uint64_t id = static_cast<std::uint64_t>(wi) * 64 + b;
          if (id >= static_cast<std::uint64_t>(M) * M * M) break;
          const std::uint32_t i = id % M, j = (id / M) % M, k = static_cast<std::uint32_t>(id / (static_cast<std::uint64_t>(M) * M));
          const bool first = sg(2 * i, 2 * j, 2 * k);
          bool mixed = false;
          for (std::uint32_t dz = 0; dz <= 2 && !mixed; ++dz)
            for (std::uint32_t dy = 0; dy <= 2 && !mixed; ++dy)
              for (std::uint32_t dx = 0; dx <= 2 && !mixed; ++dx)
                mixed = sg(std::min(2 * i + dx, N - 1), std::min(2 * j + dy, N - 1), std::min(2 * k + dz, N - 1)) != first;
          if (mixed) word |= std::uint64_t{1} << b;
        }
        bits[wi] = word;
      });
    }
    for (int L = 2; L <= K; ++L) {
      const std::uint32_t M = N >> L, Mc = M * 2, s = 1u << L, h = s / 2;
      auto& bits = levels_[L];
      parallel_for(0, static_cast<std::int64_t>((static_cast<std::uint64_t>(M) * M * M + 63) / 64), [&](std::int64_t wi) {
        std::uint64_t word = 0;
        for (int b = 0; b < 64; ++b) {
          const std::uint64_t id = static_cast<std::uint64_t>(wi) * 64 + b;
          if (id >= static_cast<std::uint64_t>(M) * M * M) break;
          const std::uint32_t i = id % M, j = (id / M) % M, k = static_cast<std::uint32_t>(id / (static_cast<std::uint64_t>(M) * M));
          const bool first = sg(i * s, j * s, k * s);
          bool mixed = false;
          for (int c = 0; c < 8 && !mixed; ++c) {
            const std::uint32_t ci = 2 * i + (c & 1), cj = 2 * j + ((c >> 1) & 1), ck = 2 * k + ((c >> 2) & 1);
            mixed = get(L - 1, (static_cast<std::uint64_t>(ck) * Mc + cj) * Mc + ci) || sg(ci * h, cj * h, ck * h) != first;
          }
          if (mixed) word |= std::uint64_t{1} << b;
        }
        bits[wi] = word;
      });
    }
  }

  bool get(int L, std::uint64_t id) const { return (levels_[L][id >> 6] >> (id & 63)) & 1u; }

 private:
  int K_;
  std::vector<std::vector<std::uint64_t>> levels_;
};

struct LevelPlan {
  std::vector<std::uint64_t> exceptions;  // Morton indices
  std::vector<std::pair<std::uint8_t, std::uint8_t>> symbols;  // (context, child) in Morton order
};

// Enumerates coded nodes of one level for the encoder (true signs known).
inline LevelPlan plan_level(const PaddedSigns& sg, const MixedPyramid& mixed, int K, int L) {
  const std::uint32_t N = 1u << K, s = 1u << L, h = s / 2, M = N >> L;
  const int bits = K - L;
  const std::uint64_t total = static_cast<std::uint64_t>(M) * M * M;
  const std::int64_t block = 1 << 15;
  const std::int64_t nblocks = static_cast<std::int64_t>((total + block - 1) / block);
  std::vector<LevelPlan> parts(static_cast<std::size_t>(nblocks));
  parallel_blocks(static_cast<std::int64_t>(total), block, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    LevelPlan& part = parts[static_cast<std::size_t>(b)];
    for (std::int64_t m = lo; m < hi; ++m) {
      std::uint32_t i, j, k;
      morton_decode(static_cast<std::uint64_t>(m), bits, i, j, k);
      const std::uint8_t ctx = corner_pattern(sg, N, s, i * s, j * s, k * s);
      bool coded = ctx != 0 && ctx != 255;
      if (!coded && mixed.get(L, (static_cast<std::uint64_t>(k) * M + j) * M + i)) {
        part.exceptions.push_back(static_cast<std::uint64_t>(m));
        coded = true;
      }
      if (coded) part.symbols.emplace_back(ctx, corner_pattern(sg, N, h, i * s, j * s, k * s));
    }
  });
  LevelPlan out;
  for (auto& p : parts) {
    out.exceptions.insert(out.exceptions.end(), p.exceptions.begin(), p.exceptions.end());
    out.symbols.insert(out.symbols.end(), p.symbols.begin(), p.symbols.end());
  }
  return out;
}

}  // namespace octree

// Adds the (context, child) statistics of one sign grid to `counts`.
inline void accumulate_symbols(const SignGrid& signs, SymbolCounts& counts) {
  const int K = octree::cube_exponent(signs.dims());
  octree::PaddedSigns sg(signs);
  octree::MixedPyramid mixed(sg, K);
  for (int L = K; L >= 1; --L) {
    auto plan = octree::plan_level(sg, mixed, K, L);
    for (auto [ctx, child] : plan.symbols) counts[ctx * 256u + child]++;
  }
}

struct TopologyStats {
  std::uint64_t coded_nodes = 0;
  std::uint64_t exceptions = 0;
};

inline std::vector<std::uint8_t> encode_topology(const SignGrid& signs, const CodeTable& table,
                                                 TopologyStats* stats = nullptr) {
  const int K = octree::cube_exponent(signs.dims());
  octree::PaddedSigns sg(signs);
  octree::MixedPyramid mixed(sg, K);
  BitWriter out;
  out.put_bit(sg(0, 0, 0));
  for (int L = K; L >= 1; --L) {
    auto plan = octree::plan_level(sg, mixed, K, L);
    out.put_gamma(plan.exceptions.size() + 1);
    for (auto m : plan.exceptions) out.put_bits(m, 3 * (K - L));
    // Symbols are coded in fixed blocks and concatenated, so the bit layout
    // does not depend on the worker count.
    const std::int64_t block = 1 << 14;
    const std::int64_t nsym = static_cast<std::int64_t>(plan.symbols.size());
    std::vector<BitWriter> parts(static_cast<std::size_t>((nsym + block - 1) / block));
    parallel_blocks(nsym, block, [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
      for (std::int64_t t = lo; t < hi; ++t) {
        auto [ctx, child] = plan.symbols[static_cast<std::size_t>(t)];
        parts[static_cast<std::size_t>(b)].put_gamma(table.rank(ctx, child) + 1u);
      }
    });
    for (auto& p : parts) out.append(p);
    if (stats) {
      stats->coded_nodes += plan.symbols.size();
      stats->exceptions += plan.exceptions.size();
    }
  }
  return out.bytes();
}

inline SignGrid decode_topology(const std::vector<std::uint8_t>& stream, Dims dims, const CodeTable& table) {
  const int K = octree::cube_exponent(dims);
  const std::uint32_t N = 1u << K;
  octree::CubeBits cube(N);
  BitReader in(stream);
  cube.set(0, 0, 0, in.get_bit());
  for (int L = K; L >= 1; --L) {
    const std::uint32_t s = 1u << L, h = s / 2, M = N >> L;
    const int bits = K - L;
    const std::uint64_t total = static_cast<std::uint64_t>(M) * M * M;
    const std::uint64_t nexc = in.get_gamma() - 1;
    if (nexc > total) throw StreamError("exception count exceeds node count");
    std::vector<std::uint64_t> exc(nexc);
    for (auto& m : exc) {
      m = in.get_bits(3 * bits);
      if (m >= total) throw StreamError("exception index out of range");
    }
    std::sort(exc.begin(), exc.end());
    std::size_t next_exc = 0;
    for (std::uint64_t m = 0; m < total; ++m) {
      std::uint32_t i, j, k;
      octree::morton_decode(m, bits, i, j, k);
      const std::uint32_t x0 = i * s, y0 = j * s, z0 = k * s;
      const std::uint8_t ctx = octree::corner_pattern(cube, N, s, x0, y0, z0);
      bool coded = ctx != 0 && ctx != 255;
      if (next_exc < exc.size() && exc[next_exc] == m) {
        if (coded) throw StreamError("exception on a node with mixed corners");
        coded = true;
        ++next_exc;
      }
      std::uint8_t child;
      if (coded) {
        const std::uint64_t r = in.get_gamma() - 1;
        if (r > 255) throw StreamError("rank out of range");
        child = table.child(ctx, static_cast<std::uint8_t>(r));
        if ((child & 1u) != (ctx & 1u)) throw StreamError("decoded octet contradicts known corner");
      } else {
        child = (ctx & 1u) ? 255 : 0;
      }
      for (int c = 1; c < 8; ++c)
        cube.set(x0 + (c & 1) * h, y0 + ((c >> 1) & 1) * h, z0 + ((c >> 2) & 1) * h, (child >> c) & 1u);
    }
  }
  SignGrid out(dims);
  for (std::size_t z = 0; z < dims.nz; ++z)
    for (std::size_t y = 0; y < dims.ny; ++y)
      for (std::size_t x = 0; x < dims.nx; ++x)
        out.set(out.index(x, y, z), cube(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(z)));
  return out;
}

}  // namespace exa

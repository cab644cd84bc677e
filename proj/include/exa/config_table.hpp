#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace exa {

// Cell-local numbering.
//   corner c = x + 2y + 4z
//   edge   e = 4 * axis + ob + 2 * oc, where (b, c) are the two other axes in
//              cyclic order and (ob, oc) the edge's offsets along them
//   facet  f = 2 * axis + side
namespace cell {

inline constexpr int kOther[3][2] = {{1, 2}, {2, 0}, {0, 1}};

inline int corner(int x, int y, int z) { return x + 2 * y + 4 * z; }

inline int edge_axis(int e) { return e / 4; }

inline int edge_lower_corner(int e) {
  const int a = e / 4, ob = e & 1, oc = (e >> 1) & 1;
  int p[3] = {0, 0, 0};
  p[kOther[a][0]] = ob;
  p[kOther[a][1]] = oc;
  return corner(p[0], p[1], p[2]);
}

inline int edge_upper_corner(int e) { return edge_lower_corner(e) | (1 << edge_axis(e)); }

inline int edge_between(int c0, int c1) {
  const int diff = c0 ^ c1;
  const int a = diff == 1 ? 0 : diff == 2 ? 1 : 2;
  const int lo = std::min(c0, c1);
  return 4 * a + ((lo >> kOther[a][0]) & 1) + 2 * ((lo >> kOther[a][1]) & 1);
}

// Facet corners in cyclic order (0,0), (1,0), (1,1), (0,1) over its two
// in-plane axes.
inline std::array<int, 4> facet_corners(int f) {
  const int a = f / 2, side = f & 1, b = kOther[a][0], c = kOther[a][1];
  std::array<int, 4> out{};
  const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int k = 0; k < 4; ++k) {
    int p[3] = {0, 0, 0};
    p[a] = side;
    p[b] = uv[k][0];
    p[c] = uv[k][1];
    out[k] = corner(p[0], p[1], p[2]);
  }
  return out;
}

// Edge k of a facet joins corners k and k + 1.
inline std::array<int, 4> facet_edges(int f) {
  auto c = facet_corners(f);
  return {edge_between(c[0], c[1]), edge_between(c[1], c[2]), edge_between(c[2], c[3]), edge_between(c[3], c[0])};
}

// The two facets containing edge e: slot 0 has normal b, slot 1 normal c.
inline std::array<int, 2> edge_facets(int e) {
  const int a = e / 4;
  return {2 * kOther[a][0] + (e & 1), 2 * kOther[a][1] + ((e >> 1) & 1)};
}

inline bool facet_ambiguous(std::uint8_t pattern, int f) {
  auto c = facet_corners(f);
  const bool s0 = (pattern >> c[0]) & 1, s1 = (pattern >> c[1]) & 1, s2 = (pattern >> c[2]) & 1,
             s3 = (pattern >> c[3]) & 1;
  return s0 == s2 && s1 == s3 && s0 != s1;
}

inline std::uint8_t ambiguous_mask(std::uint8_t pattern) {
  std::uint8_t m = 0;
  for (int f = 0; f < 6; ++f)
    if (facet_ambiguous(pattern, f)) m |= static_cast<std::uint8_t>(1u << f);
  return m;
}

}  // namespace cell

struct Segment {
  int facet;
  int e0, e1;
};

// Crossing segments of one cell: one per plain facet, two per ambiguous
// facet. facet_bits bit f = inside corners connected across facet f.
inline std::vector<Segment> cell_segments(std::uint8_t pattern, std::uint8_t facet_bits) {
  std::vector<Segment> segs;
  for (int f = 0; f < 6; ++f) {
    auto c = cell::facet_corners(f);
    auto e = cell::facet_edges(f);
    bool s[4];
    for (int k = 0; k < 4; ++k) s[k] = (pattern >> c[k]) & 1;
    int active[4], na = 0;
    for (int k = 0; k < 4; ++k)
      if (s[k] != s[(k + 1) % 4]) active[na++] = k;
    if (na == 2) {
      segs.push_back({f, e[active[0]], e[active[1]]});
    } else if (na == 4) {
      const bool connected = (facet_bits >> f) & 1;
      // Cut off the corners that are not connected across the facet.
      for (int k = 0; k < 4; ++k)
        if (s[k] != connected) segs.push_back({f, e[(k + 3) % 4], e[k]});
    }
  }
  return segs;
}

// Closed chains of segments. Each cycle starts at its smallest edge and
// proceeds toward the smaller neighbour. cycle.edges[i] and edges[i + 1]
// are joined by segment segs[i].
struct FaceCycle {
  std::vector<int> edges;
  std::vector<Segment> segs;
};

inline std::vector<FaceCycle> cell_cycles(std::uint8_t pattern, std::uint8_t facet_bits) {
  auto segs = cell_segments(pattern, facet_bits);
  std::array<std::vector<int>, 12> at;
  for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
    at[segs[i].e0].push_back(i);
    at[segs[i].e1].push_back(i);
  }
  for (int e = 0; e < 12; ++e)
    if (!at[e].empty() && at[e].size() != 2) throw std::logic_error("facet walk: edge without two segments");
  std::vector<bool> used(segs.size(), false);
  std::vector<FaceCycle> out;
  for (int start = 0; start < 12; ++start) {
    if (at[start].empty() || used[at[start][0]]) continue;
    auto other = [&](int s, int e) { return segs[s].e0 == e ? segs[s].e1 : segs[s].e0; };
    int s = other(at[start][0], start) < other(at[start][1], start) ? at[start][0] : at[start][1];
    FaceCycle cyc;
    int e = start;
    while (!used[s]) {
      used[s] = true;
      cyc.edges.push_back(e);
      cyc.segs.push_back(segs[s]);
      e = other(s, e);
      s = at[e][0] == s ? at[e][1] : at[e][0];
    }
    out.push_back(std::move(cyc));
  }
  return out;
}

// Cut positions (indices into cycle.edges) splitting a cycle into arcs so
// that no arc holds both segments of one facet. Arcs span >= 2 segments.
// Fewest arcs first, then the largest shortest arc, then the smallest cuts.
inline std::vector<int> choose_cuts(const FaceCycle& cyc) {
  const int n = static_cast<int>(cyc.segs.size());
  std::vector<int> label(n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && cyc.segs[i].facet == cyc.segs[j].facet) label[i] = cyc.segs[i].facet;
  if (std::all_of(label.begin(), label.end(), [](int l) { return l < 0; })) return {};
  for (int k = 2; k <= n / 2; ++k) {
    std::vector<int> best;
    int best_min = -1;
    std::vector<int> cuts(k);
    // Enumerate increasing k-tuples in lexicographic order.
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
      int t = 0;
      for (int i = 0; i < n; ++i)
        if (pick[i]) cuts[t++] = i;
      bool ok = true;
      int shortest = n;
      for (int j = 0; j < k && ok; ++j) {
        const int a = cuts[j], b = j + 1 < k ? cuts[j + 1] : cuts[0] + n;
        const int len = b - a;
        if (len < 2) ok = false;
        shortest = std::min(shortest, len);
        std::set<int> seen;
        for (int i = a; i < b && ok; ++i) {
          const int l = label[i % n];
          if (l >= 0 && !seen.insert(l).second) ok = false;
        }
      }
      if (ok && shortest > best_min) {
        best_min = shortest;
        best = cuts;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
    if (!best.empty()) return best;
  }
  throw std::logic_error("no valid split for face cycle");
}

struct CellCase {
  std::uint8_t pattern = 0;
  std::uint8_t facet_bits = 0;  // only bits of ambiguous facets are set
  std::uint8_t ambiguous = 0;   // mask of ambiguous facets
  int vertex_count = 0;
  std::vector<FaceCycle> cycles;
  std::vector<std::uint16_t> vertex_edges;  // edge mask per dual vertex
  std::vector<int> vertex_cycle;
  // owner[e][slot]: dual vertex holding the segment on facet edge_facets(e)[slot]
  // that ends at edge e; -1 if e is inactive.
  std::array<std::array<std::int8_t, 2>, 12> owner{};
  std::vector<std::array<std::int8_t, 3>> fills;  // extra triangles for 3-arc cycles
  int symmetry_class = -1;
};

namespace detail {

inline constexpr int kRing[4][2] = {{-1, -1}, {0, -1}, {0, 0}, {-1, 0}};
inline constexpr int kEntrySlot[4] = {1, 0, 1, 0};

// Position of a cell in the ring around its local edge e.
inline int ring_position(int e) {
  const int cb = -(e & 1), cc = -((e >> 1) & 1);
  for (int i = 0; i < 4; ++i)
    if (kRing[i][0] == cb && kRing[i][1] == cc) return i;
  return -1;
}

// Directed dual edge contributed by this cell to the polygon around e.
inline std::pair<int, int> polygon_step(const CellCase& cc, int e) {
  const int i = ring_position(e);
  const int in = cc.owner[e][kEntrySlot[i]], out = cc.owner[e][1 - kEntrySlot[i]];
  const bool lower_inside = (cc.pattern >> cell::edge_lower_corner(e)) & 1;
  return lower_inside ? std::pair{in, out} : std::pair{out, in};
}

inline CellCase make_case(std::uint8_t pattern, std::uint8_t bits) {
  CellCase cc;
  cc.pattern = pattern;
  cc.ambiguous = cell::ambiguous_mask(pattern);
  cc.facet_bits = bits & cc.ambiguous;
  for (auto& o : cc.owner) o = {-1, -1};
  cc.cycles = cell_cycles(pattern, cc.facet_bits);
  for (int ci = 0; ci < static_cast<int>(cc.cycles.size()); ++ci) {
    const auto& cyc = cc.cycles[ci];
    const int n = static_cast<int>(cyc.segs.size());
    auto cuts = choose_cuts(cyc);
    const int base = cc.vertex_count;
    std::vector<int> seg_owner(n, base);
    int arcs = 1;
    if (!cuts.empty()) {
      arcs = static_cast<int>(cuts.size());
      for (int j = 0; j < arcs; ++j) {
        const int a = cuts[j], b = j + 1 < arcs ? cuts[j + 1] : cuts[0] + n;
        for (int i = a; i < b; ++i) seg_owner[i % n] = base + j;
      }
    }
    for (int j = 0; j < arcs; ++j) {
      cc.vertex_edges.push_back(0);
      cc.vertex_cycle.push_back(ci);
    }
    cc.vertex_count += arcs;
    for (int i = 0; i < n; ++i) {
      const Segment& s = cyc.segs[i];
      const int v = seg_owner[i];
      for (int e : {s.e0, s.e1}) {
        cc.vertex_edges[v] |= static_cast<std::uint16_t>(1u << e);
        auto fs = cell::edge_facets(e);
        cc.owner[e][fs[0] == s.facet ? 0 : 1] = static_cast<std::int8_t>(v);
      }
    }
    if (arcs == 3) {
      // The three cut edges each border one pair of arcs; the fill triangle
      // runs against those polygon edges.
      std::vector<std::pair<int, int>> steps;
      for (int c : cuts) steps.push_back(polygon_step(cc, cyc.edges[c]));
      auto [x, y] = steps[0];
      int z = base;
      while (z == x || z == y) ++z;
      std::array<std::int8_t, 3> tri{static_cast<std::int8_t>(y), static_cast<std::int8_t>(x), static_cast<std::int8_t>(z)};
      for (auto [p, q] : steps) {
        bool found = false;
        for (int k = 0; k < 3; ++k)
          if (tri[k] == q && tri[(k + 1) % 3] == p) found = true;
        if (!found) throw std::logic_error("fill triangle orientation is inconsistent");
      }
      cc.fills.push_back(tri);
    } else if (arcs > 3) {
      throw std::logic_error("face cycle needs more than three arcs");
    }
  }
  return cc;
}

// The 48 cube symmetries as corner permutations.
inline std::vector<std::array<int, 8>> cube_symmetries() {
  std::vector<std::array<int, 8>> out;
  std::array<int, 3> perm{0, 1, 2};
  do {
    for (int flip = 0; flip < 8; ++flip) {
      std::array<int, 8> m{};
      for (int c = 0; c < 8; ++c) {
        int q[3];
        for (int i = 0; i < 3; ++i) q[perm[i]] = ((c >> i) & 1) ^ ((flip >> i) & 1);
        m[c] = cell::corner(q[0], q[1], q[2]);
      }
      out.push_back(m);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

inline std::pair<std::uint8_t, std::uint8_t> transform_config(std::uint8_t pattern, std::uint8_t bits,
                                                              const std::array<int, 8>& m, bool invert) {
  std::uint8_t p = 0;
  for (int c = 0; c < 8; ++c)
    if ((pattern >> c) & 1) p |= static_cast<std::uint8_t>(1u << m[c]);
  if (invert) p = static_cast<std::uint8_t>(~p);
  std::uint8_t b = 0;
  const std::uint8_t amb = cell::ambiguous_mask(pattern);
  for (int f = 0; f < 6; ++f) {
    if (!((amb >> f) & 1)) continue;
    auto fc = cell::facet_corners(f);
    std::set<int> img;
    for (int c : fc) img.insert(m[c]);
    for (int g = 0; g < 6; ++g) {
      auto gc = cell::facet_corners(g);
      if (std::set<int>(gc.begin(), gc.end()) == img) {
        const bool bit = ((bits >> f) & 1) != invert;
        if (bit) b |= static_cast<std::uint8_t>(1u << g);
      }
    }
  }
  return {p, b};
}

}  // namespace detail

// All (pattern, decider-bit) cell configurations with their dual-vertex
// layout, indexed by pattern * 64 + bits.
class ConfigTable {
 public:
  ConfigTable() {
    index_.fill(-1);
    for (int p = 0; p < 256; ++p) {
      const std::uint8_t amb = cell::ambiguous_mask(static_cast<std::uint8_t>(p));
      for (int b = 0; b < 64; ++b) {
        if (b & ~amb) continue;
        index_[p * 64 + b] = static_cast<std::int16_t>(cases_.size());
        cases_.push_back(detail::make_case(static_cast<std::uint8_t>(p), static_cast<std::uint8_t>(b)));
      }
    }
    assign_classes();
  }

  const CellCase& at(std::uint8_t pattern, std::uint8_t bits) const {
    return cases_[index_[pattern * 64 + (bits & cell::ambiguous_mask(pattern))]];
  }
  const std::vector<CellCase>& configurations() const { return cases_; }
  int class_count() const { return class_count_; }

  // Configurations that differ only by inside/outside inversion share their
  // face structure; this counts the distinct structures.
  std::size_t case_count() const {
    std::set<std::vector<std::tuple<int, int, int>>> shapes;
    for (const auto& c : cases_) {
      std::vector<std::tuple<int, int, int>> key;
      for (const auto& cyc : c.cycles)
        for (const auto& s : cyc.segs) key.emplace_back(s.facet, std::min(s.e0, s.e1), std::max(s.e0, s.e1));
      std::sort(key.begin(), key.end());
      shapes.insert(key);
    }
    return shapes.size();
  }

 private:
  void assign_classes() {
    const auto syms = detail::cube_symmetries();
    std::map<std::pair<int, int>, std::pair<int, int>> canon;  // config -> smallest orbit member
    for (const auto& c : cases_) {
      std::pair<int, int> best{c.pattern, c.facet_bits};
      for (const auto& m : syms)
        for (bool inv : {false, true}) {
          auto [p, b] = detail::transform_config(c.pattern, c.facet_bits, m, inv);
          best = std::min(best, std::pair<int, int>{p, b});
        }
      canon[{c.pattern, c.facet_bits}] = best;
    }
    std::map<std::pair<int, int>, int> ids;
    for (auto& [k, v] : canon) ids.emplace(v, 0);
    int next = 0;
    for (auto& [k, v] : ids) v = next++;
    class_count_ = next;
    for (auto& c : cases_) c.symmetry_class = ids[canon[{c.pattern, c.facet_bits}]];
  }

  std::vector<CellCase> cases_;
  std::array<std::int16_t, 256 * 64> index_{};
  int class_count_ = 0;
};

inline const ConfigTable& config_table() {
  static const ConfigTable table;
  return table;
}

}  // namespace exa

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "exa/config_table.hpp"
#include "exa/contour.hpp"
#include "exa/parallel.hpp"

namespace exa {

using Vec3 = Eigen::Vector3d;

inline constexpr std::uint64_t kFillFace = std::numeric_limits<std::uint64_t>::max();

// Dual mesh: one polygon (x-quad, 4..8 vertices) per interior active edge,
// plus fill triangles for cells whose face cycle splits three ways.
struct XQuadMesh {
  std::vector<Vec3> positions;
  std::vector<std::uint64_t> vertex_cell;   // linear index of the owning cell
  std::vector<std::uint8_t> vertex_local;   // dual vertex index within the cell

  std::vector<std::uint32_t> face_offsets{0};
  std::vector<std::uint32_t> face_vertices;
  std::vector<std::uint64_t> face_edge;     // active edge key, or kFillFace

  std::vector<Vec3> face_normals;
  std::vector<double> face_areas;
  std::vector<Vec3> vertex_normals;

  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<std::uint32_t> triangle_face;

  std::vector<std::uint32_t> vf_offsets;    // vertex -> incident faces
  std::vector<std::uint32_t> vf_faces;

  std::size_t vertex_count() const { return positions.size(); }
  std::size_t face_count() const { return face_offsets.size() - 1; }
  std::span<const std::uint32_t> face(std::size_t f) const {
    return {face_vertices.data() + face_offsets[f], face_offsets[f + 1] - face_offsets[f]};
  }
  std::span<const std::uint32_t> vertex_faces(std::size_t v) const {
    return {vf_faces.data() + vf_offsets[v], vf_offsets[v + 1] - vf_offsets[v]};
  }
};

namespace detail {

inline std::uint8_t cell_facet_bits(const ContourData& c, std::uint64_t cell_index, std::uint8_t pattern) {
  const std::uint8_t amb = cell::ambiguous_mask(pattern);
  std::uint8_t bits = 0;
  for (int f = 0; f < 6; ++f) {
    if (!((amb >> f) & 1)) continue;
    const int a = f / 2;
    const std::uint64_t corner = cell_index + (f & 1) * axis_stride(c.dims, a);
    const AmbiguousFacet* af = c.find_facet(corner * 3 + a);
    if (!af) throw std::invalid_argument("contour lacks decider bit for an ambiguous facet");
    if (af->connected) bits |= static_cast<std::uint8_t>(1u << f);
  }
  return bits;
}

inline std::uint64_t local_edge_key(const Dims& d, std::uint64_t cell_index, int e) {
  const int a = cell::edge_axis(e);
  const std::uint64_t p = cell_index + (e & 1) * axis_stride(d, cell::kOther[a][0]) +
                          ((e >> 1) & 1) * axis_stride(d, cell::kOther[a][1]);
  return p * 3 + a;
}

inline std::size_t find_cell(const ContourData& c, std::uint64_t index) {
  auto it = std::lower_bound(c.cells.begin(), c.cells.end(), index,
                             [](const ActiveCell& x, std::uint64_t k) { return x.index < k; });
  if (it == c.cells.end() || it->index != index) throw std::invalid_argument("contour is missing an active cell");
  return static_cast<std::size_t>(it - c.cells.begin());
}

}  // namespace detail

// Crossing point of an active edge in grid coordinates.
inline Vec3 edge_crossing(const ContourData& c, const ActiveEdge& e) {
  const auto p = detail::unflatten(e.key / 3, c.dims);
  Vec3 x(static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2]));
  x[static_cast<int>(e.key % 3)] += dequantize_offset(e.q, c.precision);
  return x;
}

inline void build_adjacency(XQuadMesh& m) {
  const std::size_t nv = m.vertex_count();
  m.vf_offsets.assign(nv + 1, 0);
  for (auto v : m.face_vertices) m.vf_offsets[v + 1]++;
  for (std::size_t i = 0; i < nv; ++i) m.vf_offsets[i + 1] += m.vf_offsets[i];
  m.vf_faces.assign(m.face_vertices.size(), 0);
  std::vector<std::uint32_t> fill(m.vf_offsets.begin(), m.vf_offsets.end() - 1);
  for (std::size_t f = 0; f < m.face_count(); ++f)
    for (auto v : m.face(f)) m.vf_faces[fill[v]++] = static_cast<std::uint32_t>(f);
}

inline XQuadMesh build_mesh(const ContourData& c) {
  const Dims d = c.dims;
  const auto& table = config_table();
  for (const auto& cell : c.cells) {
    const auto p = detail::unflatten(cell.index, d);
    if (cell.index >= d.count() || p[0] + 1 >= d.nx || p[1] + 1 >= d.ny || p[2] + 1 >= d.nz)
      throw std::invalid_argument("contour references a cell outside dims");
  }

  const std::size_t ncells = c.cells.size();
  std::vector<const CellCase*> cases(ncells);
  std::vector<std::uint32_t> base(ncells + 1, 0);
  parallel_for(0, static_cast<std::int64_t>(ncells), [&](std::int64_t i) {
    const auto& cell = c.cells[i];
    cases[i] = &table.at(cell.pattern, detail::cell_facet_bits(c, cell.index, cell.pattern));
    base[i + 1] = static_cast<std::uint32_t>(cases[i]->vertex_count);
  });
  for (std::size_t i = 0; i < ncells; ++i) base[i + 1] += base[i];

  XQuadMesh m;
  const std::size_t nv = base[ncells];
  m.positions.resize(nv);
  m.vertex_cell.resize(nv);
  m.vertex_local.resize(nv);
  parallel_for(0, static_cast<std::int64_t>(ncells), [&](std::int64_t i) {
    const CellCase& cc = *cases[i];
    for (int v = 0; v < cc.vertex_count; ++v) {
      Vec3 sum = Vec3::Zero();
      int n = 0;
      for (int e = 0; e < 12; ++e) {
        if (!((cc.vertex_edges[v] >> e) & 1)) continue;
        const ActiveEdge* ae = c.find_edge(detail::local_edge_key(d, c.cells[i].index, e));
        if (!ae) throw std::invalid_argument("contour is missing an active edge");
        sum += edge_crossing(c, *ae);
        ++n;
      }
      const std::size_t id = base[i] + v;
      m.positions[id] = sum / n;
      m.vertex_cell[id] = c.cells[i].index;
      m.vertex_local[id] = static_cast<std::uint8_t>(v);
    }
  });

  // One polygon per active edge whose four cells lie inside the grid.
  const std::size_t ne = c.edges.size();
  auto polygon = [&](std::size_t k, std::uint32_t* out) -> std::uint32_t {
    const std::uint64_t key = c.edges[k].key;
    const std::uint64_t pl = key / 3;
    const int a = static_cast<int>(key % 3), b = cell::kOther[a][0], cx = cell::kOther[a][1];
    const auto p = detail::unflatten(pl, d);
    if (p[b] < 1 || p[b] + 2 > d[b] || p[cx] < 1 || p[cx] + 2 > d[cx]) return 0;
    const std::uint64_t sb = detail::axis_stride(d, b), sc = detail::axis_stride(d, cx);
    std::uint32_t tmp[8];
    std::uint32_t n = 0;
    for (int r = 0; r < 4; ++r) {
      const int cb = detail::kRing[r][0], ccc = detail::kRing[r][1];
      const std::uint64_t ci = pl - (cb < 0 ? sb : 0) - (ccc < 0 ? sc : 0);
      const std::size_t idx = detail::find_cell(c, ci);
      const int e = 4 * a + (-cb) + 2 * (-ccc);
      const CellCase& cc = *cases[idx];
      const int in = cc.owner[e][detail::kEntrySlot[r]], out = cc.owner[e][1 - detail::kEntrySlot[r]];
      tmp[n++] = base[idx] + in;
      if (out != in) tmp[n++] = base[idx] + out;
    }
    if (out) {
      const bool lower_inside = c.signs.get(pl);
      for (std::uint32_t i = 0; i < n; ++i) out[i] = lower_inside ? tmp[i] : tmp[n - 1 - i];
    }
    return n;
  };
  std::vector<std::uint32_t> sizes(ne);
  parallel_for(0, static_cast<std::int64_t>(ne), [&](std::int64_t k) { sizes[k] = polygon(k, nullptr); });
  std::vector<std::uint32_t> offs(ne + 1, 0);
  for (std::size_t k = 0; k < ne; ++k) offs[k + 1] = offs[k] + sizes[k];
  std::vector<std::uint32_t> verts(offs[ne]);
  parallel_for(0, static_cast<std::int64_t>(ne), [&](std::int64_t k) {
    if (sizes[k]) polygon(k, verts.data() + offs[k]);
  });
  m.face_vertices = std::move(verts);
  for (std::size_t k = 0; k < ne; ++k) {
    if (!sizes[k]) continue;
    m.face_offsets.push_back(offs[k + 1]);
    m.face_edge.push_back(c.edges[k].key);
  }
  for (std::size_t i = 0; i < ncells; ++i) {
    for (const auto& tri : cases[i]->fills) {
      for (int t = 0; t < 3; ++t) m.face_vertices.push_back(base[i] + tri[t]);
      m.face_offsets.push_back(static_cast<std::uint32_t>(m.face_vertices.size()));
      m.face_edge.push_back(kFillFace);
    }
  }
  build_adjacency(m);
  return m;
}

// Orthonormal tangent frame around a unit normal.
inline std::pair<Vec3, Vec3> tangent_frame(const Vec3& n) {
  const double s = std::copysign(1.0, n.z());
  const double a = -1.0 / (s + n.z());
  const double b = n.x() * n.y() * a;
  return {Vec3(1.0 + s * n.x() * n.x() * a, s * b, -s * n.x()), Vec3(b, s + n.y() * n.y() * a, -n.y())};
}

inline Vec3 newell_normal(const std::vector<Vec3>& pos, std::span<const std::uint32_t> poly) {
  Vec3 n = Vec3::Zero();
  const std::size_t k = poly.size();
  for (std::size_t i = 0; i < k; ++i) n += pos[poly[i]].cross(pos[poly[(i + 1) % k]]);
  return n;
}

// Face normals (unit) and areas from polygon geometry; vertex normals as the
// area-weighted mean of incident face normals. Returns the number of
// vertices left with a zero normal.
inline std::size_t compute_normals(XQuadMesh& m) {
  const std::size_t nf = m.face_count();
  m.face_normals.assign(nf, Vec3::Zero());
  m.face_areas.assign(nf, 0.0);
  parallel_for(0, static_cast<std::int64_t>(nf), [&](std::int64_t f) {
    const Vec3 n = newell_normal(m.positions, m.face(f));
    const double len = n.norm();
    m.face_areas[f] = 0.5 * len;
    m.face_normals[f] = len > 2e-12 ? Vec3(n / len) : Vec3::Zero();
  });
  if (m.vf_offsets.size() != m.vertex_count() + 1) build_adjacency(m);
  const std::size_t nv = m.vertex_count();
  m.vertex_normals.assign(nv, Vec3::Zero());
  std::vector<std::uint8_t> zero(nv, 0);
  parallel_for(0, static_cast<std::int64_t>(nv), [&](std::int64_t v) {
    Vec3 s = Vec3::Zero();
    for (auto f : m.vertex_faces(v)) s += m.face_areas[f] * m.face_normals[f];
    const double len = s.norm();
    if (len > 0) m.vertex_normals[v] = s / len;
    else zero[v] = 1;
  });
  std::size_t flagged = 0;
  for (auto z : zero) flagged += z;
  return flagged;
}

namespace detail {

// Minimum-cost triangulation of a small polygon. cost(i, j) prices chord i-j;
// sides are free. Costs compare lexicographically.
template <typename CostFn>
void triangulate_polygon(int n, CostFn&& cost, std::vector<std::array<int, 3>>& out) {
  using Cost = std::pair<double, double>;
  constexpr int kMax = 8;
  Cost best[kMax][kMax];
  int split[kMax][kMax];
  auto add = [](Cost a, Cost b) { return Cost{a.first + b.first, a.second + b.second}; };
  auto chord = [&](int i, int j) -> Cost {
    if (j - i == 1 || (i == 0 && j == n - 1)) return {0.0, 0.0};
    return cost(i, j);
  };
  for (int len = 1; len < n; ++len)
    for (int i = 0; i + len < n; ++i) {
      const int j = i + len;
      if (len == 1) {
        best[i][j] = {0.0, 0.0};
        continue;
      }
      Cost b{std::numeric_limits<double>::infinity(), 0.0};
      int bk = -1;
      for (int k = i + 1; k < j; ++k) {
        Cost c = add(add(best[i][k], best[k][j]), add(chord(i, k), chord(k, j)));
        if (c < b) {
          b = c;
          bk = k;
        }
      }
      best[i][j] = b;
      split[i][j] = bk;
    }
  std::vector<std::pair<int, int>> stack{{0, n - 1}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    if (j - i < 2) continue;
    const int k = split[i][j];
    out.push_back({i, k, j});
    stack.push_back({i, k});
    stack.push_back({k, j});
  }
}

}  // namespace detail

inline constexpr double kDegenerateArea = 1e-12;

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// Splits every polygon into triangles. Chords join vertices from opposite
// cells where possible; a chord between neighbouring cells is only used when
// its two vertices share no other polygon. Among the rest the pair with the
// more similar vertex normals wins, then the shorter one. Zero-area triangles
// are dropped.
inline void triangulate_xquads(XQuadMesh& m) {
  if (m.vertex_normals.size() != m.vertex_count()) compute_normals(m);
  const std::size_t nf = m.face_count();
  std::vector<std::uint32_t> offs(nf + 1, 0);
  for (std::size_t f = 0; f < nf; ++f) offs[f + 1] = offs[f] + static_cast<std::uint32_t>(m.face(f).size() - 2);
  std::vector<std::array<std::uint32_t, 3>> tris(offs[nf]);
  std::vector<std::uint8_t> keep(offs[nf], 1);
  parallel_for(0, static_cast<std::int64_t>(nf), [&](std::int64_t f) {
    auto poly = m.face(f);
    const int n = static_cast<int>(poly.size());
    int group[8];
    group[0] = 0;
    for (int i = 1; i < n; ++i) group[i] = group[i - 1] + (m.vertex_cell[poly[i]] != m.vertex_cell[poly[i - 1]]);
    auto cost = [&](int i, int j) -> std::pair<double, double> {
      const int gap = (group[j] - group[i]) & 3;
      double penalty = 0.0;
      if (gap != 2) {
        // A chord between neighbouring cells may already be a chord or side
        // of another polygon around the same facet.
        int shared = 0;
        for (auto g : m.vertex_faces(poly[i])) {
          auto q = m.face(g);
          if (std::find(q.begin(), q.end(), poly[j]) != q.end()) ++shared;
        }
        penalty = shared > 1 ? 1e6 : 4.0;
      }
      const double dot = m.vertex_normals[poly[i]].dot(m.vertex_normals[poly[j]]);
      return {penalty + (1.0 - dot), (m.positions[poly[i]] - m.positions[poly[j]]).squaredNorm()};
    };
    std::vector<std::array<int, 3>> local;
    detail::triangulate_polygon(n, cost, local);
    for (std::size_t t = 0; t < local.size(); ++t) {
      auto& tri = tris[offs[f] + t];
      tri = {poly[local[t][0]], poly[local[t][1]], poly[local[t][2]]};
      if (triangle_area(m.positions[tri[0]], m.positions[tri[1]], m.positions[tri[2]]) <= kDegenerateArea)
        keep[offs[f] + t] = 0;
    }
  });
  m.triangles.clear();
  m.triangle_face.clear();
  for (std::size_t f = 0; f < nf; ++f)
    for (std::uint32_t t = offs[f]; t < offs[f + 1]; ++t)
      if (keep[t]) {
        m.triangles.push_back(tris[t]);
        m.triangle_face.push_back(static_cast<std::uint32_t>(f));
      }
}

}  // namespace exa

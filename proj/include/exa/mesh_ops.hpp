#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "exa/feature_word.hpp"
#include "exa/mesh.hpp"

namespace exa {

using Triangle = std::array<std::uint32_t, 3>;

// Indexed triangle mesh used after meshing: export, clustering, hole filling.
struct TriangleMesh {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Triangle> triangles;
  std::vector<std::uint8_t> synthetic;          // per triangle, 1 = added by fill_holes
  std::vector<VertexAttributes> attributes;     // per vertex, may be empty

  std::size_t vertex_count() const { return positions.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
};

inline TriangleMesh to_triangle_mesh(const XQuadMesh& m) {
  TriangleMesh t;
  t.positions = m.positions;
  t.normals = m.vertex_normals;
  if (t.normals.size() != t.positions.size()) t.normals.assign(t.positions.size(), Vec3::Zero());
  t.triangles = m.triangles;
  t.synthetic.assign(t.triangles.size(), 0);
  return t;
}

// Keeps the flagged triangles and the vertices they use, in original order.
inline TriangleMesh submesh(const TriangleMesh& m, const std::vector<std::uint8_t>& keep) {
  if (keep.size() != m.triangles.size()) throw std::invalid_argument("triangle mask size mismatch");
  constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> remap(m.vertex_count(), none);
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i])
      for (auto v : m.triangles[i]) remap[v] = 0;
  TriangleMesh out;
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    if (remap[v] == none) continue;
    remap[v] = static_cast<std::uint32_t>(out.positions.size());
    out.positions.push_back(m.positions[v]);
    out.normals.push_back(v < m.normals.size() ? m.normals[v] : Vec3::Zero());
    if (!m.attributes.empty()) out.attributes.push_back(m.attributes[v]);
  }
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    const auto& t = m.triangles[i];
    out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    out.synthetic.push_back(i < m.synthetic.size() ? m.synthetic[i] : 0);
  }
  return out;
}

// Triangles whose three vertices all carry the given partition label.
inline TriangleMesh extract_partition(const TriangleMesh& m, std::uint8_t label) {
  if (m.attributes.size() != m.vertex_count()) throw std::invalid_argument("mesh has no vertex attributes");
  std::vector<std::uint8_t> keep(m.triangles.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto& t = m.triangles[i];
    keep[i] = m.attributes[t[0]].partition == label && m.attributes[t[1]].partition == label &&
              m.attributes[t[2]].partition == label;
  }
  return submesh(m, keep);
}

namespace detail {

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Mutable connectivity for edge collapses.
class CollapseMesh {
 public:
  explicit CollapseMesh(const TriangleMesh& m) : pos_(m.positions), tris_(m.triangles) {
    alive_.assign(tris_.size(), 1);
    vt_.resize(pos_.size());
    for (std::uint32_t i = 0; i < tris_.size(); ++i)
      for (auto v : tris_[i]) vt_[v].push_back(i);
    std::unordered_map<std::uint64_t, int> count;
    for (const auto& t : tris_)
      for (int k = 0; k < 3; ++k) ++count[edge_key(t[k], t[(k + 1) % 3])];
    on_boundary_.assign(pos_.size(), 0);
    for (const auto& t : tris_)
      for (int k = 0; k < 3; ++k)
        if (count[edge_key(t[k], t[(k + 1) % 3])] != 2) on_boundary_[t[k]] = on_boundary_[t[(k + 1) % 3]] = 1;
  }

  std::vector<Vec3>& positions() { return pos_; }
  const std::vector<Triangle>& triangles() const { return tris_; }
  const std::vector<std::uint8_t>& alive() const { return alive_; }
  bool boundary(std::uint32_t v) const { return on_boundary_[v]; }

  std::vector<std::uint32_t> neighbours(std::uint32_t v) const {
    std::vector<std::uint32_t> n;
    for (auto t : vt_[v])
      for (auto w : tris_[t])
        if (w != v) n.push_back(w);
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
    return n;
  }

  // Link condition and geometric validity for moving a and b onto p.
  bool can_collapse(std::uint32_t a, std::uint32_t b, const Vec3& p) const {
    if (on_boundary_[a] || on_boundary_[b]) return false;
    std::vector<std::uint32_t> shared;
    for (auto t : vt_[a]) {
      const auto& tri = tris_[t];
      if (tri[0] == b || tri[1] == b || tri[2] == b) shared.push_back(t);
    }
    if (shared.size() != 2) return false;
    const auto na = neighbours(a), nb = neighbours(b);
    std::vector<std::uint32_t> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common.size() != 2) return false;
    // The links of a and b may share no edge.
    std::vector<std::uint64_t> la, lb;
    for (auto [v, out] : {std::pair{a, &la}, std::pair{b, &lb}})
      for (auto t : vt_[v]) {
        const auto& tri = tris_[t];
        const int k = tri[0] == v ? 0 : tri[1] == v ? 1 : 2;
        out->push_back(edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]));
      }
    std::sort(la.begin(), la.end());
    std::sort(lb.begin(), lb.end());
    std::vector<std::uint64_t> both;
    std::set_intersection(la.begin(), la.end(), lb.begin(), lb.end(), std::back_inserter(both));
    if (!both.empty()) return false;
    for (auto v : {a, b})
      for (auto t : vt_[v]) {
        if (std::find(shared.begin(), shared.end(), t) != shared.end()) continue;
        const auto& tri = tris_[t];
        Vec3 q[3], o[3];
        for (int k = 0; k < 3; ++k) {
          o[k] = pos_[tri[k]];
          q[k] = (tri[k] == a || tri[k] == b) ? p : pos_[tri[k]];
        }
        const Vec3 n0 = (o[1] - o[0]).cross(o[2] - o[0]);
        const Vec3 n1 = (q[1] - q[0]).cross(q[2] - q[0]);
        if (0.5 * n1.norm() <= kDegenerateArea) return false;
        if (n0.dot(n1) <= 0) return false;
      }
    return true;
  }

  // b disappears into a, which moves to p.
  void collapse(std::uint32_t a, std::uint32_t b, const Vec3& p) {
    const std::vector<std::uint32_t> incident = vt_[b];
    for (auto t : incident) {
      auto& tri = tris_[t];
      if (!alive_[t]) continue;
      if (tri[0] == a || tri[1] == a || tri[2] == a) {
        alive_[t] = 0;
        for (auto w : tri) {
          auto& list = vt_[w];
          list.erase(std::remove(list.begin(), list.end(), t), list.end());
        }
        continue;
      }
      for (auto& w : tri)
        if (w == b) w = a;
      vt_[a].push_back(t);
    }
    vt_[b].clear();
    std::sort(vt_[a].begin(), vt_[a].end());
    vt_[a].erase(std::unique(vt_[a].begin(), vt_[a].end()), vt_[a].end());
    pos_[a] = p;
  }

 private:
  std::vector<Vec3> pos_;
  std::vector<Triangle> tris_;
  std::vector<std::uint8_t> alive_;
  std::vector<std::vector<std::uint32_t>> vt_;
  std::vector<std::uint8_t> on_boundary_;
};

}  // namespace detail

inline constexpr int kClusterLevels = 5;

// Adaptive vertex clustering by edge collapses confined to octree blocks of
// edge 2, 4, ... 2^kClusterLevels grid units. A collapse is accepted when
// every original vertex of the merged cluster has a normal within angle_tol/2
// degrees of the cluster mean normal and lies within pos_tol of the cluster's
// least-squares plane; the survivor moves to the cluster centroid. Boundary
// vertices stay fixed. angle_tol = 0 returns the mesh unchanged.
inline TriangleMesh cluster_vertices(const TriangleMesh& m, double angle_tol, double pos_tol) {
  if (angle_tol < 0 || !(pos_tol > 0)) throw std::invalid_argument("clustering tolerances must be > 0");
  if (angle_tol == 0 || m.triangles.empty()) return m;
  if (m.normals.size() != m.vertex_count()) throw std::invalid_argument("mesh has no vertex normals");
  const double cos_half = std::cos(0.5 * angle_tol * std::numbers::pi / 180.0);

  detail::CollapseMesh cm(m);
  std::vector<std::vector<std::uint32_t>> members(m.vertex_count());
  std::vector<Vec3> normal_sum(m.vertex_count());
  for (std::uint32_t v = 0; v < m.vertex_count(); ++v) {
    members[v] = {v};
    normal_sum[v] = m.normals[v];
  }
  std::vector<std::uint8_t> gone(m.vertex_count(), 0);

  auto merged_ok = [&](std::uint32_t a, std::uint32_t b, Vec3& centroid) {
    const Vec3 nsum = normal_sum[a] + normal_sum[b];
    if (nsum.norm() == 0) return false;
    const Vec3 nmean = nsum.normalized();
    Vec3 c = Vec3::Zero();
    std::size_t n = 0;
    for (auto s : {a, b})
      for (auto o : members[s]) {
        const Vec3& no = m.normals[o];
        if (no.squaredNorm() == 0 || no.normalized().dot(nmean) < cos_half) return false;
        c += m.positions[o];
        ++n;
      }
    c /= static_cast<double>(n);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto s : {a, b})
      for (auto o : members[s]) {
        const Vec3 d = m.positions[o] - c;
        cov += d * d.transpose();
      }
    Vec3 plane = nmean;
    if (n >= 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      plane = es.eigenvectors().col(0);
    }
    for (auto s : {a, b})
      for (auto o : members[s])
        if (std::abs((m.positions[o] - c).dot(plane)) >= pos_tol) return false;
    centroid = c;
    return true;
  };

  for (int level = 1; level <= kClusterLevels; ++level) {
    const double block = static_cast<double>(1 << level);
    auto block_of = [&](const Vec3& p) {
      return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / block)),
                                         static_cast<std::int64_t>(std::floor(p.y() / block)),
                                         static_cast<std::int64_t>(std::floor(p.z() / block))};
    };
    std::vector<std::array<std::int64_t, 3>> home(m.vertex_count());
    for (std::uint32_t v = 0; v < m.vertex_count(); ++v)
      if (!gone[v]) home[v] = block_of(cm.positions()[v]);
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<std::uint64_t> edges;
      const auto& tris = cm.triangles();
      for (std::size_t t = 0; t < tris.size(); ++t) {
        if (!cm.alive()[t]) continue;
        for (int k = 0; k < 3; ++k) {
          const auto a = tris[t][k], b = tris[t][(k + 1) % 3];
          if (home[a] == home[b]) edges.push_back(detail::edge_key(a, b));
        }
      }
      std::sort(edges.begin(), edges.end());
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      for (auto e : edges) {
        const auto a = static_cast<std::uint32_t>(e >> 32), b = static_cast<std::uint32_t>(e & 0xffffffffu);
        if (gone[a] || gone[b]) continue;
        const auto na = cm.neighbours(a);
        if (!std::binary_search(na.begin(), na.end(), b)) continue;
        Vec3 c;
        if (!merged_ok(a, b, c)) continue;
        if (!cm.can_collapse(a, b, c)) continue;
        cm.collapse(a, b, c);
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        members[b].clear();
        normal_sum[a] += normal_sum[b];
        gone[b] = 1;
        changed = true;
      }
    }
  }

  TriangleMesh tmp;
  tmp.positions = cm.positions();
  tmp.normals.resize(m.vertex_count());
  for (std::uint32_t v = 0; v < m.vertex_count(); ++v) {
    const double len = normal_sum[v].norm();
    tmp.normals[v] = len > 0 ? Vec3(normal_sum[v] / len) : Vec3::Zero();
  }
  tmp.attributes = m.attributes;
  tmp.triangles = cm.triangles();
  tmp.synthetic = m.synthetic;
  if (tmp.synthetic.size() != tmp.triangles.size()) tmp.synthetic.assign(tmp.triangles.size(), 0);
  return submesh(tmp, cm.alive());
}

struct HoleFillReport {
  std::size_t loops = 0;
  std::size_t filled = 0;
  std::size_t too_long = 0;
  std::size_t non_simple = 0;
  std::size_t triangles_added = 0;
};

// Minimum-total-area triangulation of a closed polygon; returns index triples
// into `loop`.
inline std::vector<std::array<std::size_t, 3>> min_area_triangulation(const std::vector<Vec3>& loop) {
  const std::size_t n = loop.size();
  std::vector<std::array<std::size_t, 3>> out;
  if (n < 3) return out;
  std::vector<double> cost(n * n, 0.0);
  std::vector<std::size_t> split(n * n, 0);
  for (std::size_t len = 2; len < n; ++len)
    for (std::size_t i = 0; i + len < n; ++i) {
      const std::size_t j = i + len;
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = i + 1;
      for (std::size_t k = i + 1; k < j; ++k) {
        const double c = cost[i * n + k] + cost[k * n + j] + triangle_area(loop[i], loop[k], loop[j]);
        if (c < best) {
          best = c;
          arg = k;
        }
      }
      cost[i * n + j] = best;
      split[i * n + j] = arg;
    }
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    if (j - i < 2) continue;
    const std::size_t k = split[i * n + j];
    out.push_back({i, k, j});
    stack.push_back({k, j});
    stack.push_back({i, k});
  }
  return out;
}

inline constexpr std::size_t kDefaultMaxHoleLoop = 256;

// Closes boundary loops of at most max_loop_len edges; new triangles are
// flagged synthetic and wound consistently with their neighbours.
inline TriangleMesh fill_holes(const TriangleMesh& m, std::size_t max_loop_len = kDefaultMaxHoleLoop,
                               HoleFillReport* report = nullptr) {
  HoleFillReport rep;
  TriangleMesh out = m;
  if (out.synthetic.size() != out.triangles.size()) out.synthetic.assign(out.triangles.size(), 0);
  std::unordered_map<std::uint64_t, int> half;  // directed edge -> count
  auto dkey = [](std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; };
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) ++half[dkey(t[k], t[(k + 1) % 3])];
  // Boundary half-edges: present without their twin.
  std::map<std::uint32_t, std::vector<std::uint32_t>> next;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k], b = t[(k + 1) % 3];
      if (!half.count(dkey(b, a))) next[a].push_back(b);
    }
  for (auto& [v, outs] : next) std::sort(outs.begin(), outs.end());
  std::map<std::uint32_t, bool> used;
  for (auto& [start, outs] : next) {
    if (used[start]) continue;
    // Walk the loop; any branching vertex makes it non-simple.
    std::vector<std::uint32_t> loop;
    bool simple = true;
    std::uint32_t v = start;
    while (true) {
      if (used[v]) {
        if (v != start) simple = false;
        break;
      }
      used[v] = true;
      loop.push_back(v);
      const auto& o = next[v];
      if (o.size() != 1) simple = false;
      if (o.empty()) break;
      v = o.front();
      if (!next.count(v)) {
        simple = false;
        break;
      }
    }
    ++rep.loops;
    if (!simple || loop.size() < 3) {
      ++rep.non_simple;
      continue;
    }
    if (loop.size() > max_loop_len) {
      ++rep.too_long;
      continue;
    }
    // Boundary half-edges run along the loop; the fill uses the reverse.
    std::vector<Vec3> pts;
    for (auto it = loop.rbegin(); it != loop.rend(); ++it) pts.push_back(m.positions[*it]);
    const std::size_t n = loop.size();
    for (const auto& t : min_area_triangulation(pts)) {
      out.triangles.push_back({loop[n - 1 - t[0]], loop[n - 1 - t[1]], loop[n - 1 - t[2]]});
      out.synthetic.push_back(1);
      ++rep.triangles_added;
    }
    ++rep.filled;
  }
  if (report) *report = rep;
  return out;
}

}  // namespace exa

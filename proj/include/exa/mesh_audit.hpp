#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace exa {

struct MeshAudit {
  std::size_t vertices = 0;       // referenced by at least one triangle
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;     // one incident triangle
  std::size_t nonmanifold_edges = 0;  // three or more
  std::size_t inconsistent_edges = 0; // two triangles traversing it the same way
  std::size_t nonmanifold_vertices = 0;
  std::size_t duplicate_triangles = 0;
  long long euler = 0;
  double signed_volume = 0;

  bool closed_manifold() const {
    return boundary_edges == 0 && nonmanifold_edges == 0 && inconsistent_edges == 0 && nonmanifold_vertices == 0 &&
           duplicate_triangles == 0;
  }
};

inline MeshAudit audit_triangles(const std::vector<Eigen::Vector3d>& positions,
                                 const std::vector<std::array<std::uint32_t, 3>>& tris) {
  MeshAudit a;
  a.faces = tris.size();
  std::unordered_map<std::uint64_t, std::pair<int, int>> edges;  // key(min,max) -> (forward, backward)
  edges.reserve(tris.size() * 2);
  std::vector<std::uint8_t> used(positions.size(), 0);
  std::map<std::array<std::uint32_t, 3>, int> seen;
  for (const auto& t : tris) {
    auto s = t;
    std::sort(s.begin(), s.end());
    if (++seen[s] > 1) ++a.duplicate_triangles;
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t u = t[k], v = t[(k + 1) % 3];
      used[u] = 1;
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(u, v)) << 32) | std::max(u, v);
      auto& e = edges[key];
      if (u < v) ++e.first;
      else ++e.second;
    }
    const auto& p0 = positions[t[0]];
    const auto& p1 = positions[t[1]];
    const auto& p2 = positions[t[2]];
    a.signed_volume += p0.dot(p1.cross(p2)) / 6.0;
  }
  a.edges = edges.size();
  for (const auto& [k, e] : edges) {
    const int n = e.first + e.second;
    if (n == 1) ++a.boundary_edges;
    else if (n > 2) ++a.nonmanifold_edges;
    else if (e.first != 1) ++a.inconsistent_edges;
  }
  for (auto u : used) a.vertices += u;
  a.euler = static_cast<long long>(a.vertices) - static_cast<long long>(a.edges) + static_cast<long long>(a.faces);

  // Vertex links must form a single cycle (or a single path at a boundary).
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> link(positions.size());
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k) link[t[k]].push_back({t[(k + 1) % 3], t[(k + 2) % 3]});
  for (std::size_t v = 0; v < link.size(); ++v) {
    auto& L = link[v];
    if (L.empty()) continue;
    std::map<std::uint32_t, std::vector<std::uint32_t>> adj;
    for (auto [x, y] : L) {
      adj[x].push_back(y);
      adj[y].push_back(x);
    }
    bool bad = false;
    for (auto& [x, nb] : adj)
      if (nb.size() > 2) bad = true;
    if (!bad) {
      // connected components of the link graph
      std::map<std::uint32_t, bool> vis;
      int comps = 0;
      for (auto& [x, nb] : adj) {
        if (vis[x]) continue;
        ++comps;
        std::vector<std::uint32_t> st{x};
        vis[x] = true;
        while (!st.empty()) {
          auto y = st.back();
          st.pop_back();
          for (auto z : adj[y])
            if (!vis[z]) {
              vis[z] = true;
              st.push_back(z);
            }
        }
      }
      bad = comps != 1;
    }
    if (bad) ++a.nonmanifold_vertices;
  }
  return a;
}

}  // namespace exa

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "exa/mesh.hpp"
#include "exa/parallel.hpp"

namespace exa {

// Weighted vector median by Weiszfeld iteration, started from the weighted mean.
inline Vec3 weighted_vector_median(const std::vector<Vec3>& x, const std::vector<double>& w, int iterations = 8,
                                   double eps = 1e-9) {
  Vec3 m = Vec3::Zero();
  double ws = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m += w[i] * x[i];
    ws += w[i];
  }
  if (ws <= 0) return m;
  m /= ws;
  for (int it = 0; it < iterations; ++it) {
    Vec3 num = Vec3::Zero();
    double den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = std::max((m - x[i]).norm(), eps);
      num += (w[i] / d) * x[i];
      den += w[i] / d;
    }
    const Vec3 next = num / den;
    const double step = (next - m).norm();
    m = next;
    if (step < eps) break;
  }
  return m;
}

// Faces sharing at least one vertex with each face (the face included).
inline std::vector<std::vector<std::uint32_t>> face_neighbourhoods(const XQuadMesh& m) {
  std::vector<std::vector<std::uint32_t>> out(m.face_count());
  parallel_for(0, static_cast<std::int64_t>(m.face_count()), [&](std::int64_t f) {
    auto& nb = out[f];
    for (auto v : m.face(f))
      for (auto g : m.vertex_faces(v)) nb.push_back(g);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  });
  return out;
}

inline void refresh_face_geometry(XQuadMesh& m, bool normals_too) {
  m.face_areas.resize(m.face_count());
  if (normals_too) m.face_normals.resize(m.face_count());
  parallel_for(0, static_cast<std::int64_t>(m.face_count()), [&](std::int64_t f) {
    const Vec3 n = newell_normal(m.positions, m.face(f));
    const double len = n.norm();
    m.face_areas[f] = 0.5 * len;
    if (normals_too) m.face_normals[f] = len > 2e-12 ? Vec3(n / len) : Vec3::Zero();
  });
}

// Area-weighted mean of incident face normals.
inline void refresh_vertex_normals(XQuadMesh& m) {
  m.vertex_normals.assign(m.vertex_count(), Vec3::Zero());
  parallel_for(0, static_cast<std::int64_t>(m.vertex_count()), [&](std::int64_t v) {
    Vec3 s = Vec3::Zero();
    for (auto f : m.vertex_faces(v)) s += m.face_areas[f] * m.face_normals[f];
    const double len = s.norm();
    m.vertex_normals[v] = len > 0 ? Vec3(s / len) : Vec3::Zero();
  });
}

// Replaces each face normal by the area-weighted vector median of the
// normals of its neighbourhood, `iterations` times.
inline void smooth_face_normals(XQuadMesh& m, int iterations = 32) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (m.face_normals.size() != m.face_count()) compute_normals(m);
  const auto nbh = face_neighbourhoods(m);
  std::vector<Vec3> next(m.face_count());
  for (int it = 0; it < iterations; ++it) {
    parallel_for(0, static_cast<std::int64_t>(m.face_count()), [&](std::int64_t f) {
      std::vector<Vec3> x;
      std::vector<double> w;
      x.reserve(nbh[f].size());
      w.reserve(nbh[f].size());
      for (auto g : nbh[f]) {
        if (m.face_normals[g].squaredNorm() == 0) continue;
        x.push_back(m.face_normals[g]);
        w.push_back(m.face_areas[g]);
      }
      Vec3 n = x.empty() ? m.face_normals[f] : weighted_vector_median(x, w);
      const double len = n.norm();
      next[f] = len > 0 ? Vec3(n / len) : m.face_normals[f];
    });
    m.face_normals.swap(next);
  }
}

inline constexpr double kMaxVertexStep = 0.5;

// Moves vertices toward the planes of their incident faces (smoothed
// normal through the face centroid), capped per iteration, then recomputes
// vertex normals from the face normals.
inline void update_vertex_positions(XQuadMesh& m, int iterations = 8) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (m.face_normals.size() != m.face_count()) compute_normals(m);
  std::vector<Vec3> centroid(m.face_count());
  std::vector<Vec3> next(m.vertex_count());
  for (int it = 0; it < iterations; ++it) {
    parallel_for(0, static_cast<std::int64_t>(m.face_count()), [&](std::int64_t f) {
      Vec3 c = Vec3::Zero();
      auto poly = m.face(f);
      for (auto v : poly) c += m.positions[v];
      centroid[f] = c / static_cast<double>(poly.size());
    });
    parallel_for(0, static_cast<std::int64_t>(m.vertex_count()), [&](std::int64_t v) {
      Vec3 d = Vec3::Zero();
      int n = 0;
      for (auto f : m.vertex_faces(v)) {
        const Vec3& nf = m.face_normals[f];
        d += nf * nf.dot(centroid[f] - m.positions[v]);
        ++n;
      }
      if (n) d /= n;
      const double len = d.norm();
      if (len > kMaxVertexStep) d *= kMaxVertexStep / len;
      next[v] = m.positions[v] + d;
    });
    m.positions.swap(next);
  }
  refresh_face_geometry(m, false);
  refresh_vertex_normals(m);
}

}  // namespace exa

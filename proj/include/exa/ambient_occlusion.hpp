#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "exa/mesh.hpp"
#include "exa/parallel.hpp"

namespace exa {

inline constexpr int kDefaultAoRays = 160;
inline constexpr double kDefaultAoRadius = 64.0;
inline constexpr double kAoStartOffset = 0.5;

// Angular weight of a ray at angle phi from the normal.
inline double ao_angle_weight(double phi) { return std::sin(phi) * std::sqrt(std::max(0.0, std::cos(phi))); }

// Distance weight of a hit at distance d within radius r.
inline double ao_distance_weight(double d, double r) { return d < r ? 1.0 - d / r : 0.0; }

// n directions on the hemisphere around `normal`: spherical Fibonacci
// lattice on the +z hemisphere, rotated onto the normal.
inline std::vector<Vec3> fibonacci_directions(int n, const Vec3& normal) {
  if (n < 1) throw std::invalid_argument("ray count must be >= 1");
  const double len = normal.norm();
  if (!(len > 0)) throw std::invalid_argument("zero normal");
  const Vec3 z = normal / len;
  auto [t, b] = tangent_frame(z);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out(n);
  for (int i = 0; i < n; ++i) {
    const double cz = 1.0 - (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    const double az = golden * i;
    out[i] = (r * std::cos(az)) * t + (r * std::sin(az)) * b + cz * z;
  }
  return out;
}

// Uniform grid of triangle references for ray casting.
class TriangleGrid {
 public:
  TriangleGrid(const std::vector<Vec3>& pos, const std::vector<std::array<std::uint32_t, 3>>& tris, double cell = 0.0)
      : h_(cell) {
    if (cell < 0) throw std::invalid_argument("grid cell must be >= 0");
    if (tris.empty()) return;
    prims_.reserve(tris.size());
    for (const auto& t : tris) prims_.push_back({pos[t[0]], pos[t[1]] - pos[t[0]], pos[t[2]] - pos[t[0]]});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const auto& t : tris)
      for (auto v : t) {
        lo = lo.cwiseMin(pos[v]);
        hi = hi.cwiseMax(pos[v]);
      }
    // cell 0 picks unit cells, coarsened to at most 256 per axis.
    if (h_ == 0) h_ = std::max(1.0, (hi - lo).maxCoeff() / 256.0);
    origin_ = lo - Vec3::Constant(1e-6);
    for (int a = 0; a < 3; ++a) n_[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - origin_[a]) / h_ + 1e-9)));
    const std::size_t ncell = static_cast<std::size_t>(n_[0]) * n_[1] * n_[2];
    offsets_.assign(ncell + 1, 0);
    auto range = [&](const std::array<std::uint32_t, 3>& t, std::array<int, 3>& a, std::array<int, 3>& b) {
      for (int k = 0; k < 3; ++k) {
        double mn = std::min({pos[t[0]][k], pos[t[1]][k], pos[t[2]][k]});
        double mx = std::max({pos[t[0]][k], pos[t[1]][k], pos[t[2]][k]});
        a[k] = std::clamp(static_cast<int>(std::floor((mn - origin_[k]) / h_)), 0, n_[k] - 1);
        b[k] = std::clamp(static_cast<int>(std::floor((mx - origin_[k]) / h_)), 0, n_[k] - 1);
      }
    };
    for (const auto& t : tris) {
      std::array<int, 3> a, b;
      range(t, a, b);
      for (int z = a[2]; z <= b[2]; ++z)
        for (int y = a[1]; y <= b[1]; ++y)
          for (int x = a[0]; x <= b[0]; ++x) offsets_[cell_index(x, y, z) + 1]++;
    }
    for (std::size_t i = 0; i < ncell; ++i) offsets_[i + 1] += offsets_[i];
    refs_.resize(offsets_[ncell]);
    std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::uint32_t ti = 0; ti < tris.size(); ++ti) {
      std::array<int, 3> a, b;
      range(tris[ti], a, b);
      for (int z = a[2]; z <= b[2]; ++z)
        for (int y = a[1]; y <= b[1]; ++y)
          for (int x = a[0]; x <= b[0]; ++x) refs_[fill[cell_index(x, y, z)]++] = ti;
    }
  }

  // Nearest hit parameter t in (0, tmax] along o + t d (d unit), or +inf.
  double first_hit(const Vec3& o, const Vec3& d, double tmax) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (refs_.empty()) return inf;
    // Clip the ray to the grid box.
    double t0 = 0, t1 = tmax;
    for (int a = 0; a < 3; ++a) {
      const double lo = origin_[a], hi = origin_[a] + n_[a] * h_;
      if (std::abs(d[a]) < 1e-15) {
        if (o[a] < lo || o[a] > hi) return inf;
      } else {
        double ta = (lo - o[a]) / d[a], tb = (hi - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
    }
    if (t0 > t1) return inf;
    const Vec3 p = o + t0 * d;
    int c[3], step[3];
    double next[3], delta[3];
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - origin_[a]) / h_)), 0, n_[a] - 1);
      if (d[a] > 0) {
        step[a] = 1;
        next[a] = t0 + (origin_[a] + (c[a] + 1) * h_ - p[a]) / d[a];
        delta[a] = h_ / d[a];
      } else if (d[a] < 0) {
        step[a] = -1;
        next[a] = t0 + (origin_[a] + c[a] * h_ - p[a]) / d[a];
        delta[a] = -h_ / d[a];
      } else {
        step[a] = 0;
        next[a] = inf;
        delta[a] = inf;
      }
    }
    double best = inf;
    while (true) {
      const std::size_t ci = cell_index(c[0], c[1], c[2]);
      for (std::uint32_t k = offsets_[ci]; k < offsets_[ci + 1]; ++k) {
        const double t = intersect(o, d, prims_[refs_[k]]);
        if (t > 1e-9 && t <= tmax && t < best) best = t;
      }
      const int a = next[0] < next[1] ? (next[0] < next[2] ? 0 : 2) : (next[1] < next[2] ? 1 : 2);
      const double t_exit = next[a];
      if (best <= t_exit || t_exit > t1) break;
      c[a] += step[a];
      if (c[a] < 0 || c[a] >= n_[a]) break;
      next[a] += delta[a];
    }
    return best;
  }

 private:
  std::size_t cell_index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * n_[1] + y) * n_[0] + x;
  }

  // Moeller-Trumbore; returns +inf on miss.
  struct Prim {
    Vec3 a, e1, e2;
  };

  static double intersect(const Vec3& o, const Vec3& d, const Prim& p) {
    const Vec3 &a = p.a, &e1 = p.e1, &e2 = p.e2;
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) return std::numeric_limits<double>::infinity();
    const double inv = 1.0 / det;
    const Vec3 tv = o - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0 || u > 1) return std::numeric_limits<double>::infinity();
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) * inv;
    if (v < 0 || u + v > 1) return std::numeric_limits<double>::infinity();
    return e2.dot(qv) * inv;
  }

  std::vector<Prim> prims_;
  double h_;
  Vec3 origin_ = Vec3::Zero();
  int n_[3] = {0, 0, 0};
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> refs_;
};

// Openness per vertex in [0, 1]: angle-weighted mean over hemisphere rays of
// d / r for a hit at distance d < r, and 1 for rays that escape.
inline std::vector<double> compute_ambient_occlusion(const std::vector<Vec3>& positions,
                                                    const std::vector<Vec3>& normals,
                                                    const std::vector<std::array<std::uint32_t, 3>>& triangles,
                                                    int n_rays = kDefaultAoRays, double radius = kDefaultAoRadius) {
  if (n_rays < 1) throw std::invalid_argument("ray count must be >= 1");
  if (!(radius > 0)) throw std::invalid_argument("radius must be > 0");
  if (normals.size() != positions.size()) throw std::invalid_argument("normal count mismatch");
  const TriangleGrid grid(positions, triangles);
  // Directions around +z; rotated per vertex.
  const std::vector<Vec3> local = fibonacci_directions(n_rays, Vec3::UnitZ());
  std::vector<double> w1(n_rays);
  double den = 0;
  for (int i = 0; i < n_rays; ++i) {
    w1[i] = ao_angle_weight(std::acos(std::clamp(local[i].z(), -1.0, 1.0)));
    den += w1[i];
  }
  std::vector<double> ao(positions.size(), 1.0);
  if (!(den > 0)) return ao;
  parallel_for(0, static_cast<std::int64_t>(positions.size()), [&](std::int64_t v) {
    const Vec3& n = normals[v];
    if (n.squaredNorm() == 0) return;
    const Vec3 nu = n.normalized();
    const auto [t, b] = tangent_frame(nu);
    const Vec3 o = positions[v] + kAoStartOffset * nu;
    double num = 0;
    for (int i = 0; i < n_rays; ++i) {
      const Vec3 d = local[i].x() * t + local[i].y() * b + local[i].z() * nu;
      const double hit = grid.first_hit(o, d, radius + kAoStartOffset);
      double open = 1.0;
      if (std::isfinite(hit)) open = 1.0 - ao_distance_weight((o + hit * d - positions[v]).norm(), radius);
      num += w1[i] * open;
    }
    ao[v] = std::clamp(num / den, 0.0, 1.0);
  });
  return ao;
}

}  // namespace exa

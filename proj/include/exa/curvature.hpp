#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <utility>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/LU>

#include "exa/mesh.hpp"
#include "exa/parallel.hpp"

namespace exa {

struct CurvaturePair {
  double k1 = 0, k2 = 0;  // k1 >= k2
};

inline constexpr double kCurvatureEps = 1e-9;

// Normal curvature between two oriented samples.
inline double pair_curvature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  const Vec3 d = p2 - p1;
  const double l2 = d.squaredNorm();
  if (l2 < kCurvatureEps * kCurvatureEps) return std::numeric_limits<double>::quiet_NaN();
  return (n2 - n1).dot(d) / l2;
}

// Per x-quad, the vertices of each of the four cells are merged (mean
// position and normal). Samples: both diagonals and both pairs of opposite
// side midpoints, each with its chord direction.
struct FaceCurvatureSamples {
  std::array<double, 4> k{};
  std::array<Vec3, 4> dir{};
  bool valid = false;
};

inline FaceCurvatureSamples xquad_samples(const XQuadMesh& m, std::size_t f) {
  FaceCurvatureSamples out;
  if (m.face_edge[f] == kFillFace) return out;
  auto poly = m.face(f);
  Vec3 P[4], N[4];
  int cnt[4] = {0, 0, 0, 0};
  for (int g = 0; g < 4; ++g) P[g] = N[g] = Vec3::Zero();
  int g = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (i > 0 && m.vertex_cell[poly[i]] != m.vertex_cell[poly[i - 1]]) ++g;
    if (g > 3) return out;
    P[g] += m.positions[poly[i]];
    N[g] += m.vertex_normals[poly[i]];
    ++cnt[g];
  }
  if (g != 3) return out;
  for (int k = 0; k < 4; ++k) {
    P[k] /= cnt[k];
    N[k] /= cnt[k];
  }
  const Vec3 a[4] = {P[0], P[1], 0.5 * (P[0] + P[1]), 0.5 * (P[1] + P[2])};
  const Vec3 b[4] = {P[2], P[3], 0.5 * (P[2] + P[3]), 0.5 * (P[3] + P[0])};
  const Vec3 na[4] = {N[0], N[1], 0.5 * (N[0] + N[1]), 0.5 * (N[1] + N[2])};
  const Vec3 nb[4] = {N[2], N[3], 0.5 * (N[2] + N[3]), 0.5 * (N[3] + N[0])};
  for (int k = 0; k < 4; ++k) {
    out.k[k] = pair_curvature(a[k], na[k], b[k], nb[k]);
    out.dir[k] = b[k] - a[k];
  }
  out.valid = true;
  return out;
}

// Principal curvatures at a vertex: least-squares fit of a symmetric
// tangent-plane tensor to the samples of all incident x-quads, with each
// chord projected onto the tangent plane. Falls back to the extreme samples
// when the chord directions do not span the fit.
inline CurvaturePair fit_curvature_tensor(const Vec3& normal, const std::vector<std::pair<double, Vec3>>& samples) {
  const auto [t, b] = tangent_frame(normal);
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atk = Eigen::Vector3d::Zero();
  double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
  int used = 0;
  for (const auto& [k, d] : samples) {
    hi = std::max(hi, k);
    lo = std::min(lo, k);
    double u = d.dot(t), w = d.dot(b);
    const double len = std::hypot(u, w);
    if (len < kCurvatureEps) continue;
    u /= len;
    w /= len;
    const Eigen::Vector3d row(u * u, 2 * u * w, w * w);
    ata += row * row.transpose();
    atk += row * k;
    ++used;
  }
  if (samples.empty()) return {};
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (used < 3 || lu.rank() < 3) return {hi, lo};
  const Eigen::Vector3d s = lu.solve(atk);
  const double mean = 0.5 * (s[0] + s[2]);
  const double dev = std::hypot(0.5 * (s[0] - s[2]), s[1]);
  return {mean + dev, mean - dev};
}

inline std::vector<CurvaturePair> estimate_curvatures(const XQuadMesh& m) {
  if (m.vertex_normals.size() != m.vertex_count()) throw std::invalid_argument("mesh has no vertex normals");
  const std::size_t nf = m.face_count();
  std::vector<FaceCurvatureSamples> face(nf);
  parallel_for(0, static_cast<std::int64_t>(nf), [&](std::int64_t f) { face[f] = xquad_samples(m, f); });
  std::vector<CurvaturePair> out(m.vertex_count());
  parallel_for(0, static_cast<std::int64_t>(m.vertex_count()), [&](std::int64_t v) {
    const Vec3& n = m.vertex_normals[v];
    if (n.squaredNorm() == 0) return;
    std::vector<std::pair<double, Vec3>> samples;
    for (auto f : m.vertex_faces(v))
      if (face[f].valid)
        for (int k = 0; k < 4; ++k)
          if (!std::isnan(face[f].k[k])) samples.emplace_back(face[f].k[k], face[f].dir[k]);
    out[v] = fit_curvature_tensor(n, samples);
  });
  return out;
}

inline constexpr double kDefaultCMin = 1.0 / 64.0;

inline double shape_angle(double k1, double k2) {
  double phi = std::atan2(k1, k2);
  if (phi < 0) phi += 2 * std::numbers::pi;
  return phi;
}

// 7-bit shape code: 0 for flat, else 1 + 14 * shape_bin + curvedness_bin.
inline std::uint8_t classify_shape(double k1, double k2, double c_min = kDefaultCMin) {
  if (!(c_min > 0)) throw std::invalid_argument("c_min must be > 0");
  if (k1 < k2) throw std::invalid_argument("classify_shape requires k1 >= k2");
  const double c = std::hypot(k1, k2);
  if (c < c_min) return 0;
  const double phi = shape_angle(k1, k2);
  const int sb = std::clamp(static_cast<int>(std::floor(9.0 * (phi - std::numbers::pi / 4) / std::numbers::pi)), 0, 8);
  const int cb = std::clamp(static_cast<int>(std::floor(2.0 * std::log2(c / c_min))), 0, 13);
  return static_cast<std::uint8_t>(1 + 14 * sb + cb);
}

inline int shape_bin_of(std::uint8_t code) { return code == 0 ? -1 : (code - 1) / 14; }
inline int curvedness_bin_of(std::uint8_t code) { return code == 0 ? -1 : (code - 1) % 14; }

}  // namespace exa

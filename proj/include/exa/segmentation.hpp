#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

#include "exa/curvature.hpp"

namespace exa {

inline constexpr double kDefaultK1Threshold = -0.5;
inline constexpr int kMaxPartitions = 7;

struct Segmentation {
  std::vector<std::uint8_t> labels;     // 0 = boundary, 1..7
  std::vector<std::size_t> sizes;       // vertices per label, index 0..7
  std::size_t components = 0;           // before merging into the cap
  std::size_t merged_components = 0;    // folded into label 7
};

// Vertices whose most concave principal curvature (k2) lies below the
// threshold become boundary; the remaining
// vertices are grouped into connected components along triangle edges and
// labelled by decreasing size.
inline Segmentation segment_mesh(std::size_t vertex_count, const std::vector<std::array<std::uint32_t, 3>>& triangles,
                                 const std::vector<CurvaturePair>& curv, double k1_threshold = kDefaultK1Threshold) {
  if (!(k1_threshold < 0)) throw std::invalid_argument("k1 threshold must be negative");
  if (curv.size() != vertex_count) throw std::invalid_argument("curvature count mismatch");
  std::vector<std::uint32_t> parent(vertex_count);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<std::uint8_t> boundary(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) boundary[v] = curv[v].k2 < k1_threshold;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[k], b = t[(k + 1) % 3];
      if (boundary[a] || boundary[b]) continue;
      const std::uint32_t ra = find(a), rb = find(b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  std::vector<std::size_t> size(vertex_count, 0);
  for (std::size_t v = 0; v < vertex_count; ++v)
    if (!boundary[v]) ++size[find(static_cast<std::uint32_t>(v))];
  std::vector<std::uint32_t> roots;
  for (std::size_t v = 0; v < vertex_count; ++v)
    if (size[v] > 0) roots.push_back(static_cast<std::uint32_t>(v));
  std::stable_sort(roots.begin(), roots.end(), [&](auto a, auto b) { return size[a] > size[b]; });
  std::vector<std::uint8_t> root_label(vertex_count, 0);
  for (std::size_t i = 0; i < roots.size(); ++i)
    root_label[roots[i]] = static_cast<std::uint8_t>(std::min<std::size_t>(i + 1, kMaxPartitions));

  Segmentation s;
  s.components = roots.size();
  s.merged_components = roots.size() > kMaxPartitions ? roots.size() - kMaxPartitions : 0;
  s.labels.assign(vertex_count, 0);
  s.sizes.assign(kMaxPartitions + 1, 0);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!boundary[v]) s.labels[v] = root_label[find(static_cast<std::uint32_t>(v))];
    ++s.sizes[s.labels[v]];
  }
  return s;
}

}  // namespace exa

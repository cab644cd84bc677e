#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "exa/code_table.hpp"
#include "exa/contour.hpp"
#include "exa/filters.hpp"
#include "exa/octree_codec.hpp"
#include "exa/volume.hpp"

namespace exa {

// Seeded synthetic shapes used to train the default code table: balls and
// ellipsoids off center, plus smoothed noise blobs, at a few resolutions.
inline std::vector<Volume3D> table_corpus_volumes(std::uint64_t seed = 20240601) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Volume3D> out;
  for (std::size_t n : {24u, 40u, 72u}) {
    const Dims d{n, n, n};
    const double c = 0.5 * (n - 1);
    for (int k = 0; k < 3; ++k) {
      const double cx = c + (u(rng) - 0.5) * 0.2 * n, cy = c + (u(rng) - 0.5) * 0.2 * n,
                   cz = c + (u(rng) - 0.5) * 0.2 * n;
      const double r = (0.2 + 0.2 * u(rng)) * n;
      out.push_back(Volume3D::from_function(d, [&](double x, double y, double z) {
        return r - std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
      }));
    }
    for (int k = 0; k < 3; ++k) {
      const double ax = (0.15 + 0.25 * u(rng)) * n, ay = (0.15 + 0.25 * u(rng)) * n,
                   az = (0.15 + 0.25 * u(rng)) * n;
      const double cx = c + (u(rng) - 0.5) * 0.1 * n;
      out.push_back(Volume3D::from_function(d, [&](double x, double y, double z) {
        const double q = (x - cx) * (x - cx) / (ax * ax) + (y - c) * (y - c) / (ay * ay) + (z - c) * (z - c) / (az * az);
        return 1.0 - std::sqrt(q);
      }));
    }
    for (int k = 0; k < 2; ++k) {
      std::normal_distribution<double> g(0.0, 1.0);
      std::vector<float> v(d.count());
      for (auto& f : v) f = static_cast<float>(g(rng));
      Volume3D blob(d, std::move(v));
      for (int i = 0; i < 4; ++i) blob = gauss3(blob);
      out.push_back(std::move(blob));
    }
  }
  return out;
}

inline SymbolCounts table_corpus_counts(std::uint64_t seed = 20240601) {
  SymbolCounts counts = make_symbol_counts();
  for (const auto& v : table_corpus_volumes(seed)) accumulate_symbols(compute_signs(v, 0.0f), counts);
  return counts;
}

}  // namespace exa

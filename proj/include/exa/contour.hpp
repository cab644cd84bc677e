#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exa/parallel.hpp"
#include "exa/volume.hpp"

namespace exa {

// Bit-packed inside/outside flag per grid point (value >= tau is inside).
class SignGrid {
 public:
  SignGrid() = default;
  explicit SignGrid(Dims d) : dims_(d), words_((d.count() + 63) / 64, 0) {}

  const Dims& dims() const { return dims_; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (z * dims_.ny + y) * dims_.nx + x; }
  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  bool get(std::size_t x, std::size_t y, std::size_t z) const { return get(index(x, y, z)); }
  void set(std::size_t i, bool v) {
    if (v)
      words_[i >> 6] |= std::uint64_t{1} << (i & 63);
    else
      words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
  }
  std::size_t count_inside() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  std::vector<std::uint64_t>& words() { return words_; }
  const std::vector<std::uint64_t>& words() const { return words_; }
  bool operator==(const SignGrid&) const = default;

 private:
  Dims dims_;
  std::vector<std::uint64_t> words_;
};

// Grid edge from point p along `axis`: key = linear(p) * 3 + axis.
struct ActiveEdge {
  std::uint64_t key = 0;
  std::uint16_t q = 0;  // quantized crossing offset from the lower endpoint
  bool operator==(const ActiveEdge&) const = default;
};

struct ActiveCell {
  std::uint64_t index = 0;  // linear index of the lower corner
  std::uint8_t pattern = 0;  // corner c = dx + 2dy + 4dz
  bool operator==(const ActiveCell&) const = default;
};

// Cell facet with all four edges active; key = linear(lower corner) * 3 + normal axis.
struct AmbiguousFacet {
  std::uint64_t key = 0;
  bool connected = false;  // inside corners connected across the facet
  bool operator==(const AmbiguousFacet&) const = default;
};

struct ContourData {
  Dims dims;
  float tau = 0;
  int precision = 8;
  SignGrid signs;
  std::vector<ActiveEdge> edges;
  std::vector<ActiveCell> cells;
  std::vector<AmbiguousFacet> facets;

  bool operator==(const ContourData&) const = default;

  const ActiveEdge* find_edge(std::uint64_t key) const {
    auto it = std::lower_bound(edges.begin(), edges.end(), key,
                               [](const ActiveEdge& e, std::uint64_t k) { return e.key < k; });
    return it != edges.end() && it->key == key ? &*it : nullptr;
  }
  const AmbiguousFacet* find_facet(std::uint64_t key) const {
    auto it = std::lower_bound(facets.begin(), facets.end(), key,
                               [](const AmbiguousFacet& f, std::uint64_t k) { return f.key < k; });
    return it != facets.end() && it->key == key ? &*it : nullptr;
  }
  std::size_t ambiguous_count() const { return facets.size(); }
};

// Bilinear saddle test on a facet; corners in cyclic order. Returns true
// when the inside corners are connected across the facet.
inline bool asymptotic_decider(const std::array<double, 4>& c, double tau) {
  const double denom = c[0] + c[2] - c[1] - c[3];
  if (std::abs(denom) < 1e-12 * (std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]) + 1e-300))
    return false;
  const double saddle = (c[0] * c[2] - c[1] * c[3]) / denom;
  return saddle >= tau;
}

inline std::uint16_t quantize_offset(double t, int precision) {
  const double steps = std::ldexp(1.0, precision);
  t = std::clamp(t, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::min(std::floor(t * steps), steps - 1));
}

inline double dequantize_offset(std::uint16_t q, int precision) {
  return (q + 0.5) / std::ldexp(1.0, precision);
}

namespace detail {

inline constexpr int kOtherAxes[3][2] = {{1, 2}, {2, 0}, {0, 1}};

inline std::array<std::size_t, 3> unflatten(std::uint64_t i, const Dims& d) {
  return {static_cast<std::size_t>(i % d.nx), static_cast<std::size_t>((i / d.nx) % d.ny),
          static_cast<std::size_t>(i / (d.nx * d.ny))};
}

inline std::uint64_t axis_stride(const Dims& d, int axis) {
  return axis == 0 ? 1 : axis == 1 ? d.nx : static_cast<std::uint64_t>(d.nx) * d.ny;
}

// Two passes per z-slab: count, prefix-sum, fill. Output is in slab order,
// which is the canonical (z, y, x, axis) order.
template <typename T, typename CountFn, typename FillFn>
std::vector<T> slab_collect(std::size_t nslabs, CountFn&& count, FillFn&& fill) {
  std::vector<std::size_t> offs(nslabs + 1, 0);
  parallel_for(0, static_cast<std::int64_t>(nslabs), [&](std::int64_t z) { offs[z + 1] = count(z); });
  for (std::size_t i = 0; i < nslabs; ++i) offs[i + 1] += offs[i];
  std::vector<T> out(offs[nslabs]);
  parallel_for(0, static_cast<std::int64_t>(nslabs), [&](std::int64_t z) { fill(z, &out[offs[z]]); });
  return out;
}

}  // namespace detail

inline SignGrid compute_signs(const Volume3D& vol, float tau) {
  SignGrid s(vol.dims());
  const auto& v = vol.values();
  // Each word covers 64 consecutive points; parallel over words.
  auto& w = s.words();
  parallel_for(0, static_cast<std::int64_t>(w.size()), [&](std::int64_t k) {
    std::uint64_t word = 0;
    const std::size_t base = static_cast<std::size_t>(k) * 64;
    for (std::size_t b = 0; b < 64 && base + b < v.size(); ++b)
      if (v[base + b] >= tau) word |= std::uint64_t{1} << b;
    w[k] = word;
  });
  return s;
}

// Active edges, cells and ambiguous facets implied by a sign grid. Offsets
// and decider bits are left zero.
inline void derive_active_sets(ContourData& c) {
  const Dims d = c.dims;
  const SignGrid& s = c.signs;
  auto edge_scan = [&](std::int64_t z, ActiveEdge* out) {
    std::size_t n = 0;
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = s.index(x, y, static_cast<std::size_t>(z));
        const bool si = s.get(i);
        const bool ok[3] = {x + 1 < d.nx, y + 1 < d.ny, static_cast<std::size_t>(z) + 1 < d.nz};
        for (int a = 0; a < 3; ++a) {
          if (ok[a] && s.get(i + detail::axis_stride(d, a)) != si) {
            if (out) out[n] = ActiveEdge{static_cast<std::uint64_t>(i) * 3 + a, 0};
            ++n;
          }
        }
      }
    return n;
  };
  c.edges = detail::slab_collect<ActiveEdge>(
      d.nz, [&](std::int64_t z) { return edge_scan(z, nullptr); }, edge_scan);

  const std::size_t sx = 1, sy = d.nx, sz = d.nx * d.ny;
  auto cell_scan = [&](std::int64_t z, ActiveCell* out) {
    std::size_t n = 0;
    if (static_cast<std::size_t>(z) + 1 >= d.nz) return n;
    for (std::size_t y = 0; y + 1 < d.ny; ++y)
      for (std::size_t x = 0; x + 1 < d.nx; ++x) {
        const std::size_t i = s.index(x, y, static_cast<std::size_t>(z));
        std::uint8_t p = 0;
        for (int k = 0; k < 8; ++k)
          if (s.get(i + (k & 1) * sx + ((k >> 1) & 1) * sy + ((k >> 2) & 1) * sz)) p |= std::uint8_t(1u << k);
        if (p != 0 && p != 255) {
          if (out) out[n] = ActiveCell{i, p};
          ++n;
        }
      }
    return n;
  };
  c.cells = detail::slab_collect<ActiveCell>(
      d.nz, [&](std::int64_t z) { return cell_scan(z, nullptr); }, cell_scan);

  auto facet_scan = [&](std::int64_t z, AmbiguousFacet* out) {
    std::size_t n = 0;
    const std::size_t zz = static_cast<std::size_t>(z);
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t p[3] = {x, y, zz};
        const std::size_t i = s.index(x, y, zz);
        for (int a = 0; a < 3; ++a) {
          const int b = detail::kOtherAxes[a][0], cc = detail::kOtherAxes[a][1];
          if (p[b] + 1 >= d[b] || p[cc] + 1 >= d[cc]) continue;
          const std::size_t ob = detail::axis_stride(d, b), oc = detail::axis_stride(d, cc);
          const bool s0 = s.get(i), s1 = s.get(i + ob), s2 = s.get(i + ob + oc), s3 = s.get(i + oc);
          if (s0 == s2 && s1 == s3 && s0 != s1) {
            if (out) out[n] = AmbiguousFacet{static_cast<std::uint64_t>(i) * 3 + a, false};
            ++n;
          }
        }
      }
    return n;
  };
  c.facets = detail::slab_collect<AmbiguousFacet>(
      d.nz, [&](std::int64_t z) { return facet_scan(z, nullptr); }, facet_scan);
}

// Signs and active sets only.
inline ContourData build_sign_field(const Volume3D& vol, float tau) {
  ContourData c;
  c.dims = vol.dims();
  c.tau = tau;
  c.signs = compute_signs(vol, tau);
  derive_active_sets(c);
  return c;
}

inline double crossing_offset(const Volume3D& vol, std::uint64_t edge_key, double tau) {
  const std::uint64_t i = edge_key / 3;
  const int a = static_cast<int>(edge_key % 3);
  const double v0 = vol.values()[i], v1 = vol.values()[i + detail::axis_stride(vol.dims(), a)];
  return std::clamp((tau - v0) / (v1 - v0), 0.0, 1.0);
}

// Full contour: signs, quantized crossings and decider bits.
inline ContourData extract_contour(const Volume3D& vol, float tau, int precision = 8) {
  if (precision < 1 || precision > 16) throw std::invalid_argument("precision must be in [1, 16]");
  ContourData c = build_sign_field(vol, tau);
  c.precision = precision;
  parallel_for(0, static_cast<std::int64_t>(c.edges.size()), [&](std::int64_t k) {
    c.edges[k].q = quantize_offset(crossing_offset(vol, c.edges[k].key, tau), precision);
  });
  const Dims d = vol.dims();
  parallel_for(0, static_cast<std::int64_t>(c.facets.size()), [&](std::int64_t k) {
    const std::uint64_t i = c.facets[k].key / 3;
    const int a = static_cast<int>(c.facets[k].key % 3);
    const std::uint64_t ob = detail::axis_stride(d, detail::kOtherAxes[a][0]);
    const std::uint64_t oc = detail::axis_stride(d, detail::kOtherAxes[a][1]);
    const auto& v = vol.values();
    c.facets[k].connected = asymptotic_decider({v[i], v[i + ob], v[i + ob + oc], v[i + oc]}, tau);
  });
  return c;
}

}  // namespace exa

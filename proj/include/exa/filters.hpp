#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "exa/volume.hpp"

namespace exa {

// sigma' / sigma for the Tukey biweight that attenuates a difference of one
// sigma by the same factor e^(-1/2) as the Gaussian range kernel.
inline const double kTukeyScale = 1.0 / std::sqrt(1.0 - std::sqrt(std::exp(-0.5)));

inline double tukey_weight(double x, double sigma_prime) {
  if (!(sigma_prime > 0)) throw std::invalid_argument("tukey: sigma' must be > 0");
  const double a = std::abs(x);
  if (a >= sigma_prime) return 0.0;
  const double r = a / sigma_prime;
  const double t = 1.0 - r * r;
  return t * t;
}

inline double gauss_range_weight(double x, double sigma) {
  return std::exp(-0.5 * (x * x) / (sigma * sigma));
}

enum class RangeFunction { tukey, gauss };

namespace detail {

inline constexpr std::array<double, 3> kBinomial = {0.25, 0.5, 0.25};

// Clamped neighbour indices along one axis.
struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  explicit AxisTaps(std::size_t n) : lo(n), hi(n) {
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = i == 0 ? 0 : i - 1;
      hi[i] = i + 1 < n ? i + 1 : n - 1;
    }
  }
};

}  // namespace detail

// Separable (1,2,1)/4 binomial low-pass with clamp-to-edge borders.
inline Volume3D gauss3(const Volume3D& vol) {
  const Dims d = vol.dims();
  const detail::AxisTaps tx(d.nx), ty(d.ny), tz(d.nz);
  const auto& k = detail::kBinomial;
  std::vector<double> a(vol.values().begin(), vol.values().end()), b(d.count());
  auto idx = [&](std::size_t x, std::size_t y, std::size_t z) { return (z * d.ny + y) * d.nx + x; };
  parallel_for(0, static_cast<std::int64_t>(d.nz), [&](std::int64_t zz) {
    const auto z = static_cast<std::size_t>(zz);
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        b[idx(x, y, z)] = k[0] * a[idx(tx.lo[x], y, z)] + k[1] * a[idx(x, y, z)] + k[2] * a[idx(tx.hi[x], y, z)];
  });
  parallel_for(0, static_cast<std::int64_t>(d.nz), [&](std::int64_t zz) {
    const auto z = static_cast<std::size_t>(zz);
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        a[idx(x, y, z)] = k[0] * b[idx(x, ty.lo[y], z)] + k[1] * b[idx(x, y, z)] + k[2] * b[idx(x, ty.hi[y], z)];
  });
  std::vector<float> out(d.count());
  parallel_for(0, static_cast<std::int64_t>(d.nz), [&](std::int64_t zz) {
    const auto z = static_cast<std::size_t>(zz);
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        out[idx(x, y, z)] = static_cast<float>(k[0] * a[idx(x, y, tz.lo[z])] + k[1] * a[idx(x, y, z)] +
                                               k[2] * a[idx(x, y, tz.hi[z])]);
  });
  return Volume3D(d, std::move(out), vol.spacing_um());
}

// Low-pass then keep the even-index voxel of every 2x2x2 block.
inline Volume3D gauss_resample(const Volume3D& vol) {
  const Dims d = vol.dims();
  if (d.nx < 2 || d.ny < 2 || d.nz < 2) throw std::invalid_argument("gauss_resample: every axis must be >= 2");
  const Volume3D f = gauss3(vol);
  const Dims o{d.nx / 2, d.ny / 2, d.nz / 2};
  std::vector<float> out(o.count());
  parallel_for(0, static_cast<std::int64_t>(o.nz), [&](std::int64_t z) {
    for (std::size_t y = 0; y < o.ny; ++y)
      for (std::size_t x = 0; x < o.nx; ++x)
        out[(z * o.ny + y) * o.nx + x] = f.at(2 * x, 2 * y, 2 * static_cast<std::size_t>(z));
  });
  return Volume3D(o, std::move(out), vol.spacing_um() * 2);
}

// 3x3x3 median, clamp-to-edge. Optional mode, not on the default path.
inline Volume3D median3(const Volume3D& vol) {
  const Dims d = vol.dims();
  std::vector<float> out(d.count());
  parallel_for(0, static_cast<std::int64_t>(d.nz), [&](std::int64_t z) {
    std::array<float, 27> w;
    for (std::int64_t y = 0; y < static_cast<std::int64_t>(d.ny); ++y)
      for (std::int64_t x = 0; x < static_cast<std::int64_t>(d.nx); ++x) {
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) w[n++] = vol.clamped(x + dx, y + dy, z + dz);
        std::nth_element(w.begin(), w.begin() + 13, w.end());
        out[(z * d.ny + y) * d.nx + x] = w[13];
      }
  });
  return Volume3D(d, std::move(out), vol.spacing_um());
}

struct BilateralOptions {
  int iterations = 2;
  RangeFunction range = RangeFunction::tukey;
  // Recompute the guidance image from the current iterate each pass.
  bool refresh_guide = true;
};

// Joint (cross) bilateral filter: range weights come from a Gauss-filtered
// guidance image, spatial weights from the 3x3x3 binomial kernel.
inline Volume3D denoise_joint_bilateral(const Volume3D& vol, double sigma, const BilateralOptions& opt = {}) {
  if (opt.iterations < 1) throw std::invalid_argument("bilateral: iterations must be >= 1");
  if (!(sigma > 0)) throw std::invalid_argument("bilateral: sigma must be > 0");
  const Dims d = vol.dims();
  const detail::AxisTaps tx(d.nx), ty(d.ny), tz(d.nz);
  const double sigma_prime = kTukeyScale * sigma;
  auto range = [&](double diff) {
    return opt.range == RangeFunction::tukey ? tukey_weight(diff, sigma_prime) : gauss_range_weight(diff, sigma);
  };

  Volume3D cur = vol;
  Volume3D guide = gauss3(vol);
  for (int it = 0; it < opt.iterations; ++it) {
    if (it > 0 && opt.refresh_guide) guide = gauss3(cur);
    const auto& g = guide.values();
    const auto& c = cur.values();
    std::vector<float> out(d.count());
    parallel_for(0, static_cast<std::int64_t>(d.nz), [&](std::int64_t zz) {
      const auto z = static_cast<std::size_t>(zz);
      const std::size_t zs[3] = {tz.lo[z], z, tz.hi[z]};
      for (std::size_t y = 0; y < d.ny; ++y) {
        const std::size_t ys[3] = {ty.lo[y], y, ty.hi[y]};
        for (std::size_t x = 0; x < d.nx; ++x) {
          const std::size_t xs[3] = {tx.lo[x], x, tx.hi[x]};
          const double gc = g[(z * d.ny + y) * d.nx + x];
          double acc = 0.0, wsum = 0.0;
          for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) {
              const std::size_t row = (zs[k] * d.ny + ys[j]) * d.nx;
              const double wkj = detail::kBinomial[k] * detail::kBinomial[j];
              for (int i = 0; i < 3; ++i) {
                const std::size_t q = row + xs[i];
                const double w = wkj * detail::kBinomial[i] * range(gc - g[q]);
                acc += w * c[q];
                wsum += w;
              }
            }
          const std::size_t p = (z * d.ny + y) * d.nx + x;
          out[p] = wsum > 0 ? static_cast<float>(acc / wsum) : c[p];
        }
      }
    });
    cur = Volume3D(d, std::move(out), vol.spacing_um());
  }
  return cur;
}

}  // namespace exa

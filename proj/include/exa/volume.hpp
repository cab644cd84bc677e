#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exa/parallel.hpp"

namespace exa {

struct Dims {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Dims&) const = default;
};

inline std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << d.nx << " x " << d.ny << " x " << d.nz;
  return os.str();
}

// Scalar field on a regular grid, x-fastest layout.
class Volume3D {
 public:
  Volume3D() = default;

  Volume3D(Dims dims, std::vector<float> values, double spacing_um = 1.0)
      : dims_(dims), spacing_um_(spacing_um), values_(std::move(values)) {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
      throw std::invalid_argument("volume dims must be >= 1");
    if (values_.size() != dims_.count())
      throw std::invalid_argument("value count " + std::to_string(values_.size()) +
                                  " does not match dims " + to_string(dims_));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        std::size_t x = i % dims_.nx, y = (i / dims_.nx) % dims_.ny, z = i / (dims_.nx * dims_.ny);
        throw std::invalid_argument("non-finite value at (" + std::to_string(x) + "," +
                                    std::to_string(y) + "," + std::to_string(z) + ")");
      }
    }
  }

  Volume3D(Dims dims, float fill, double spacing_um = 1.0)
      : Volume3D(dims, std::vector<float>(dims.count(), fill), spacing_um) {}

  template <typename Fn>
  static Volume3D from_function(Dims dims, Fn&& fn, double spacing_um = 1.0) {
    std::vector<float> v(dims.count());
    parallel_for(0, static_cast<std::int64_t>(dims.nz), [&](std::int64_t z) {
      for (std::size_t y = 0; y < dims.ny; ++y)
        for (std::size_t x = 0; x < dims.nx; ++x)
          v[(static_cast<std::size_t>(z) * dims.ny + y) * dims.nx + x] =
              static_cast<float>(fn(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)));
    });
    return Volume3D(dims, std::move(v), spacing_um);
  }

  const Dims& dims() const { return dims_; }
  double spacing_um() const { return spacing_um_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<float>& values() const { return values_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (z * dims_.ny + y) * dims_.nx + x;
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return values_[index(x, y, z)]; }

  // Clamp-to-edge access for windowed filters.
  float clamped(std::int64_t x, std::int64_t y, std::int64_t z) const {
    x = std::clamp<std::int64_t>(x, 0, static_cast<std::int64_t>(dims_.nx) - 1);
    y = std::clamp<std::int64_t>(y, 0, static_cast<std::int64_t>(dims_.ny) - 1);
    z = std::clamp<std::int64_t>(z, 0, static_cast<std::int64_t>(dims_.nz) - 1);
    return at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z));
  }

  std::pair<float, float> range() const {
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    return {*lo, *hi};
  }

  bool operator==(const Volume3D& o) const { return dims_ == o.dims_ && values_ == o.values_; }

 private:
  Dims dims_;
  double spacing_um_ = 1.0;
  std::vector<float> values_;
};

inline Volume3D crop_volume(const Volume3D& vol, std::array<std::size_t, 3> offset, Dims size) {
  const Dims& d = vol.dims();
  for (int a = 0; a < 3; ++a) {
    if (size[a] == 0 || offset[a] + size[a] > d[a])
      throw std::out_of_range("crop box exceeds volume dims " + to_string(d));
  }
  std::vector<float> out(size.count());
  parallel_for(0, static_cast<std::int64_t>(size.nz), [&](std::int64_t z) {
    for (std::size_t y = 0; y < size.ny; ++y) {
      const float* src = &vol.values()[vol.index(offset[0], offset[1] + y, offset[2] + z)];
      std::copy(src, src + size.nx, &out[(z * size.ny + y) * size.nx]);
    }
  });
  return Volume3D(size, std::move(out), vol.spacing_um());
}

// Surrounds the volume with `width` layers of `value`.
inline Volume3D pad_volume(const Volume3D& vol, std::size_t width, float value) {
  const Dims& d = vol.dims();
  Dims p{d.nx + 2 * width, d.ny + 2 * width, d.nz + 2 * width};
  std::vector<float> out(p.count(), value);
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        out[((z + width) * p.ny + y + width) * p.nx + x + width] = vol.at(x, y, z);
  return Volume3D(p, std::move(out), vol.spacing_um());
}

// ---------------------------------------------------------------------------
// Synthetic phantoms

enum class PhantomKind { sphere, nested_box, bimodal_noise };

struct PhantomSpec {
  PhantomKind kind = PhantomKind::sphere;
  Dims dims{64, 64, 64};
  float mu_low = 0.0f;
  float mu_up = 1.0f;
  double noise = 0.0;
  std::uint64_t seed = 1;

  // nested_box: outer shell [margin, n - margin) with wall thickness `wall`;
  // inner box separated from the shell by `gap`; optional bridge across the gap
  // on the +x side of size bridge_size in y and z.
  double margin = 4.0;
  double wall = 4.0;
  double gap = 2.0;
  bool bridge = true;
  double bridge_size = 8.0;
};

inline const char* noise_generator_name() { return "mt19937_64/std::normal_distribution"; }

namespace detail {

// Signed distance to an axis-aligned box, positive inside.
inline double box_depth(double x, double y, double z, const std::array<double, 3>& lo,
                        const std::array<double, 3>& hi) {
  const double p[3] = {x, y, z};
  double inside = 1e300, outside2 = 0.0;
  bool in = true;
  for (int a = 0; a < 3; ++a) {
    double d = std::min(p[a] - lo[a], hi[a] - p[a]);
    inside = std::min(inside, d);
    if (d < 0) {
      in = false;
      outside2 += d * d;
    }
  }
  return in ? inside : -std::sqrt(outside2);
}

}  // namespace detail

// Material depth of the nested-box phantom (positive inside clay).
inline double nested_box_depth(const PhantomSpec& s, double x, double y, double z) {
  using detail::box_depth;
  const double m = s.margin;
  std::array<double, 3> olo{m, m, m};
  std::array<double, 3> ohi{s.dims.nx - 1 - m, s.dims.ny - 1 - m, s.dims.nz - 1 - m};
  std::array<double, 3> clo, chi, ilo, ihi;
  for (int a = 0; a < 3; ++a) {
    clo[a] = olo[a] + s.wall;
    chi[a] = ohi[a] - s.wall;
    ilo[a] = clo[a] + s.gap;
    ihi[a] = chi[a] - s.gap;
  }
  double shell = std::min(box_depth(x, y, z, olo, ohi), -box_depth(x, y, z, clo, chi));
  double inner = box_depth(x, y, z, ilo, ihi);
  double d = std::max(shell, inner);
  if (s.bridge) {
    const double cy = 0.5 * (s.dims.ny - 1), cz = 0.5 * (s.dims.nz - 1), h = 0.5 * s.bridge_size;
    std::array<double, 3> blo{ihi[0] - 1.0, cy - h, cz - h};
    std::array<double, 3> bhi{chi[0] + 1.0, cy + h, cz + h};
    d = std::max(d, box_depth(x, y, z, blo, bhi));
  }
  return d;
}

inline Volume3D generate_phantom(const PhantomSpec& spec) {
  if (spec.noise < 0) throw std::invalid_argument("noise level must be >= 0");
  const Dims& d = spec.dims;
  if (d.nx < 2 || d.ny < 2 || d.nz < 2) throw std::invalid_argument("phantom dims must be >= 2");
  Volume3D clean;
  switch (spec.kind) {
    case PhantomKind::sphere: {
      const double cx = 0.5 * (d.nx - 1), cy = 0.5 * (d.ny - 1), cz = 0.5 * (d.nz - 1);
      clean = Volume3D::from_function(d, [&](double x, double y, double z) {
        return std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
      });
      break;
    }
    case PhantomKind::nested_box: {
      const double need = 2 * (spec.margin + spec.wall + spec.gap) + 2;
      if (d.nx < need || d.ny < need || d.nz < need)
        throw std::invalid_argument("nested-box geometry exceeds dims");
      if (spec.bridge && (spec.bridge_size > d.ny - need || spec.bridge_size > d.nz - need))
        throw std::invalid_argument("bridge exceeds inner box");
      const double lo = spec.mu_low, hi = spec.mu_up;
      clean = Volume3D::from_function(d, [&](double x, double y, double z) {
        double t = std::clamp(0.5 + nested_box_depth(spec, x, y, z), 0.0, 1.0);
        return lo + (hi - lo) * t;
      });
      break;
    }
    case PhantomKind::bimodal_noise: {
      const double half = 0.5 * d.nz;
      clean = Volume3D::from_function(d, [&](double, double, double z) {
        return z < half ? spec.mu_low : spec.mu_up;
      });
      break;
    }
  }
  if (spec.noise == 0) return clean;
  std::vector<float> v = clean.values();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, spec.noise);
  for (float& f : v) f = static_cast<float>(f + normal(rng));
  return Volume3D(d, std::move(v), clean.spacing_um());
}

}  // namespace exa

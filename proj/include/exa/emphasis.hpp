#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "exa/curvature.hpp"
#include "exa/feature_word.hpp"

namespace exa {

using Rgb = std::array<std::uint8_t, 3>;

enum class EmphasisMode { curvature, bw, blue_orange, ao, ao_bw };

inline constexpr std::array<EmphasisMode, 5> kEmphasisModes{EmphasisMode::curvature, EmphasisMode::bw,
                                                            EmphasisMode::blue_orange, EmphasisMode::ao,
                                                            EmphasisMode::ao_bw};

inline std::string_view emphasis_name(EmphasisMode m) {
  switch (m) {
    case EmphasisMode::curvature: return "curvature";
    case EmphasisMode::bw: return "emphasis-bw";
    case EmphasisMode::blue_orange: return "emphasis-blueorange";
    case EmphasisMode::ao: return "ao";
    case EmphasisMode::ao_bw: return "ao-emphasis";
  }
  return "";
}

inline EmphasisMode parse_emphasis(std::string_view s) {
  for (auto m : kEmphasisModes)
    if (emphasis_name(m) == s) return m;
  throw std::invalid_argument("unknown emphasis mode: " + std::string(s));
}

inline constexpr Rgb kNeutralGray{128, 128, 128};
inline constexpr Rgb kSkyBlue{70, 130, 220};
inline constexpr Rgb kSunOrange{250, 160, 40};

// Convexity in [-1, 1] (dome +1, saddle 0, cup -1) and strength in (0, 1]
// of a non-flat shape code.
inline double shape_convexity(std::uint8_t code) { return (4.0 - shape_bin_of(code)) / 4.0; }
inline double shape_strength(std::uint8_t code) { return (curvedness_bin_of(code) + 1) / 14.0; }

namespace detail {

inline std::uint8_t to_byte(double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 255.0))); }

inline Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {to_byte(a[0] + (b[0] - a[0]) * t), to_byte(a[1] + (b[1] - a[1]) * t), to_byte(a[2] + (b[2] - a[2]) * t)};
}

// One hue per shape bin, dome (red) through saddle (green) to cup (blue).
inline constexpr std::array<Rgb, 9> kShapePalette{{{220, 40, 40},
                                                  {235, 120, 30},
                                                  {230, 200, 40},
                                                  {150, 210, 60},
                                                  {60, 180, 90},
                                                  {40, 190, 190},
                                                  {40, 130, 220},
                                                  {70, 70, 210},
                                                  {120, 40, 170}}};

}  // namespace detail

// 127-entry lookup table indexed by the 7-bit shape code.
inline std::array<Rgb, 127> shape_lut(EmphasisMode mode) {
  std::array<Rgb, 127> lut{};
  lut[0] = kNeutralGray;
  for (int code = 1; code < 127; ++code) {
    const auto c = static_cast<std::uint8_t>(code);
    const double s = shape_convexity(c), m = shape_strength(c);
    switch (mode) {
      case EmphasisMode::curvature:
        lut[code] = detail::mix(kNeutralGray, detail::kShapePalette[shape_bin_of(c)], m);
        break;
      case EmphasisMode::bw:
      case EmphasisMode::ao_bw: {
        const auto g = detail::to_byte(128.0 + 127.0 * s * m);
        lut[code] = {g, g, g};
        break;
      }
      case EmphasisMode::blue_orange:
        lut[code] = detail::mix(kNeutralGray, s >= 0 ? kSunOrange : kSkyBlue, std::abs(s) * m);
        break;
      case EmphasisMode::ao:
        lut[code] = kNeutralGray;
        break;
    }
  }
  return lut;
}

// `lut` must be shape_lut(mode).
inline Rgb vertex_color(const VertexAttributes& a, EmphasisMode mode, const std::array<Rgb, 127>& lut) {
  if (mode == EmphasisMode::ao) {
    const auto g = detail::to_byte(255.0 * a.ao / 63.0);
    return {g, g, g};
  }
  if (a.shape > 126) throw std::invalid_argument("shape code exceeds 7-bit range");
  Rgb c = lut[a.shape];
  if (mode == EmphasisMode::ao_bw)
    for (auto& ch : c) ch = detail::to_byte(ch * (a.ao / 63.0));
  return c;
}

inline Rgb vertex_color(const VertexAttributes& a, EmphasisMode mode) { return vertex_color(a, mode, shape_lut(mode)); }

}  // namespace exa

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exa/volume.hpp"

namespace exa {

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value histogram of a volume with its two dominant modes located.
// All locations are in value units; densities refer to the smoothed pd.
struct HistogramModel {
  int bin_count = 0;
  double vmin = 0, vmax = 0, bin_width = 0;
  std::vector<std::uint64_t> counts;
  std::vector<double> pd;         // normalized density per bin
  std::vector<double> pd_smooth;  // 5-bin moving average of pd
  int low_bin = -1, up_bin = -1, min_bin = -1;
  double mu_low = 0, mu_up = 0, pd_up = 0;
  double min_loc = 0, pd_min = 0;
  double sigma = 0;

  double center(int bin) const { return vmin + (bin + 0.5) * bin_width; }
};

namespace detail {

inline std::vector<double> moving_average(const std::vector<double>& v, int radius) {
  const int n = static_cast<int>(v.size());
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    double s = 0;
    int c = 0;
    for (int j = std::max(0, i - radius); j <= std::min(n - 1, i + radius); ++j, ++c) s += v[j];
    out[i] = s / c;
  }
  return out;
}

}  // namespace detail

// Bins over [min, max] of the volume, smooths, and locates the two modes: the
// global maximum plus the tallest other local maximum separated from it by a
// valley below half the lower of the two peaks.
inline HistogramModel build_histogram(const Volume3D& vol, int bin_count = 1024) {
  if (bin_count < 64) throw std::invalid_argument("histogram needs >= 64 bins");
  HistogramModel h;
  h.bin_count = bin_count;
  auto [lo, hi] = vol.range();
  h.vmin = lo;
  h.vmax = hi;
  if (!(hi > lo)) throw EstimationError("histogram is not bimodal: constant volume");
  h.bin_width = (h.vmax - h.vmin) / bin_count;
  h.counts.assign(bin_count, 0);
  for (float v : vol.values()) {
    int b = static_cast<int>((v - h.vmin) / h.bin_width);
    h.counts[std::clamp(b, 0, bin_count - 1)]++;
  }
  const double norm = 1.0 / (static_cast<double>(vol.size()) * h.bin_width);
  h.pd.resize(bin_count);
  for (int i = 0; i < bin_count; ++i) h.pd[i] = h.counts[i] * norm;
  h.pd_smooth = detail::moving_average(h.pd, 2);
  const auto& s = h.pd_smooth;

  std::vector<int> maxima;
  for (int i = 0; i < bin_count; ++i) {
    const bool left = i == 0 || s[i] > s[i - 1];
    const bool right = i == bin_count - 1 || s[i] >= s[i + 1];
    if (left && right && s[i] > 0) maxima.push_back(i);
  }
  if (maxima.size() < 2) throw EstimationError("histogram is not bimodal: fewer than two local maxima");
  int top = maxima[0];
  for (int m : maxima)
    if (s[m] > s[top]) top = m;

  int second = -1, valley = -1;
  for (int m : maxima) {
    if (m == top) continue;
    const int a = std::min(m, top), b = std::max(m, top);
    int v = a + 1;
    for (int i = a + 1; i < b; ++i)
      if (s[i] < s[v]) v = i;
    if (v >= b) continue;
    if (s[v] < 0.5 * std::min(s[m], s[top]) && (second < 0 || s[m] > s[second])) {
      second = m;
      valley = v;
    }
  }
  if (second < 0) throw EstimationError("histogram is not bimodal: no valley between maxima");

  h.low_bin = std::min(top, second);
  h.up_bin = std::max(top, second);
  h.min_bin = valley;
  h.mu_low = h.center(h.low_bin);
  h.mu_up = h.center(h.up_bin);
  h.pd_up = s[h.up_bin];
  h.min_loc = h.center(h.min_bin);
  h.pd_min = s[h.min_bin];
  return h;
}

// Half-width of the upper mode at e^(-1/2) of its height, measured on the
// slope that faces the valley.
inline double estimate_sigma(const HistogramModel& h) {
  if (h.up_bin < 0 || h.min_bin < 0 || h.min_bin >= h.up_bin)
    throw std::invalid_argument("estimate_sigma: histogram has no located modes");
  const auto& s = h.pd_smooth;
  const double target = h.pd_up * std::exp(-0.5);
  for (int i = h.up_bin - 1; i >= h.min_bin; --i) {
    if (s[i] <= target) {
      const double frac = (s[i + 1] - target) / (s[i + 1] - s[i]);
      const double x = h.center(i + 1) - frac * h.bin_width;
      return std::abs(h.mu_up - x);
    }
  }
  throw EstimationError("estimate_sigma: density never falls below e^(-1/2) of the upper peak");
}

// First location above the valley where the density exceeds f times the
// valley density.
inline double estimate_threshold(const HistogramModel& h, double f = 2.0) {
  if (!(f > 1.0)) throw std::invalid_argument("estimate_threshold: f must be > 1");
  if (h.up_bin < 0 || h.min_bin < 0) throw std::invalid_argument("estimate_threshold: no located modes");
  const auto& s = h.pd_smooth;
  const double target = f * h.pd_min;
  for (int i = h.min_bin + 1; i <= h.up_bin; ++i) {
    if (s[i] > target) {
      double frac = (target - s[i - 1]) / (s[i] - s[i - 1]);
      if (!(frac > 0)) frac = 1.0;
      const double tau = h.center(i - 1) + frac * h.bin_width;
      if (tau <= h.min_loc || tau >= h.mu_up) break;
      return tau;
    }
  }
  throw EstimationError("estimate_threshold: density never exceeds f * pd_min below the upper peak");
}

inline double estimate_snr(const HistogramModel& h) {
  if (!(h.sigma > 0)) throw std::invalid_argument("estimate_snr: sigma must be > 0");
  return 20.0 * std::log10((h.mu_up - h.mu_low) / h.sigma);
}

// Convenience: build the histogram and fill in sigma.
inline HistogramModel analyze_histogram(const Volume3D& vol, int bin_count = 1024) {
  HistogramModel h = build_histogram(vol, bin_count);
  h.sigma = estimate_sigma(h);
  return h;
}

}  // namespace exa

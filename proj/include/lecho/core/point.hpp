#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace lecho {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Position or momentum with up to two components; 1-D quantities leave y at zero.
using Point = std::array<double, 2>;

inline Point operator+(Point a, Point b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(Point a, Point b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, Point a) { return {s * a[0], s * a[1]}; }
inline double dot(Point a, Point b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(Point a) { return std::hypot(a[0], a[1]); }

/// Wrap x into [0, extent).
inline double wrap_periodic(double x, double extent) {
  double r = std::fmod(x, extent);
  if (r < 0.0) r += extent;
  if (r >= extent) r -= extent;
  return r;
}

/// Wrap x into [-extent/2, extent/2) (minimum-image displacement).
inline double wrap_centered(double x, double extent) {
  return wrap_periodic(x + 0.5 * extent, extent) - 0.5 * extent;
}

}  // namespace lecho

#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace qlev {

/// Coordinates (y1, y2) in a plane, in lattice-period units.
using Point2 = std::array<double, 2>;

/// Point or direction in R^m, m in {3, 4}.
using RealVector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double dot2(const Point2& a, const Point2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(const Point2& a) { return std::hypot(a[0], a[1]); }
inline Point2 sub2(const Point2& a, const Point2& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline double dist2(const Point2& a, const Point2& b) { return norm2(sub2(a, b)); }

/// Counterclockwise quarter turn (-v2, v1).
inline Point2 rot90(const Point2& v) { return {-v[1], v[0]}; }

}  // namespace qlev

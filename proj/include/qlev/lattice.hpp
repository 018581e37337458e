#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlev/types.hpp"

namespace qlev {

/// Integer m-tuple in lattice coordinates.
class IntegerVector {
 public:
  IntegerVector() = default;
  explicit IntegerVector(std::vector<std::int64_t> entries) : entries_(std::move(entries)) {}
  IntegerVector(std::initializer_list<std::int64_t> entries) : entries_(entries) {}

  int dim() const { return static_cast<int>(entries_.size()); }
  std::int64_t operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  const std::vector<std::int64_t>& entries() const { return entries_; }

  bool isZero() const;
  double euclideanNorm() const;
  std::int64_t maxNorm() const;
  RealVector toReal() const;

  /// "(1,-2,3,0)"
  std::string str() const;

  friend auto operator<=>(const IntegerVector&, const IntegerVector&) = default;

 private:
  std::vector<std::int64_t> entries_;
};

/// Divides by the gcd of |entries| and flips sign so the first nonzero entry is positive.
/// Throws ErrorCode::ZeroVector on the zero vector.
IntegerVector primitiveNormalize(const IntegerVector& v);

/// Returns +1 or -1: the factor primitiveNormalize applied to the sign.
int canonicalSign(std::span<const double> v, double eps = 0.0);

/// Linear form x -> <coefficients, x>. A rational form carries an integer witness
/// proportional to its coefficients.
struct LinearForm {
  RealVector coefficients;
  std::optional<IntegerVector> witness;

  static LinearForm fromInteger(const IntegerVector& v);
  static LinearForm fromReal(RealVector coefficients);

  int dim() const { return static_cast<int>(coefficients.size()); }
  double operator()(std::span<const double> x) const { return dot(coefficients, x); }
  /// this + scale * other; the result carries no witness.
  LinearForm perturbed(const LinearForm& other, double scale) const;
};

/// Affine 2-plane {x : l_i(x) = b_i} with orthonormal parametrization
/// x(y) = basePoint + y1 * basis[0] + y2 * basis[1].
struct PlaneSpec {
  std::vector<LinearForm> forms;
  RealVector offsets;
  RealVector basePoint;
  std::array<RealVector, 2> basis;

  int dim() const { return static_cast<int>(basePoint.size()); }
  RealVector lift(const Point2& y) const;
  void liftInto(const Point2& y, std::span<double> out) const;
  /// Plane coordinates of the orthogonal projection of x onto the plane.
  Point2 project(std::span<const double> x) const;
  /// (<v, u1>, <v, u2>)
  Point2 inPlane(std::span<const double> v) const;
  /// d1 * u1 + d2 * u2
  RealVector toAmbient(const Point2& d) const;
};

/// Builds the plane from n = m - 2 independent forms. The kernel basis comes from
/// row reduction with partial pivoting followed by Gram-Schmidt in index order, so
/// identical inputs give bit-identical bases. basePoint is the minimum-norm solution.
PlaneSpec buildPlane(std::vector<LinearForm> forms, RealVector offsets);

/// Same plane, basis rotated by angle (radians) inside the plane.
PlaneSpec rotateBasis(const PlaneSpec& plane, double angle);

struct NormalCandidate {
  IntegerVector normal;
  double residual = 0.0;  ///< max_i |<n, dir_i>| / |n|
};

/// Exhaustive search over primitive n with |n|_inf <= maxNorm and first nonzero
/// entry positive. Returns every n with residual < tol, sorted by (residual, |n|).
/// An empty result means no integral hyperplane fits the directions.
std::vector<NormalCandidate> rationalizeCommonNormal(std::span<const RealVector> dirs,
                                                     int maxNorm, double tol);

}  // namespace qlev

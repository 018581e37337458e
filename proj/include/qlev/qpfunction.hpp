#pragma once

#include <array>
#include <span>
#include <vector>

#include "qlev/lattice.hpp"
#include "qlev/types.hpp"

namespace qlev {

/// One term a * cos(2 pi <k, x> + phi).
struct Harmonic {
  IntegerVector freq;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Z^m-periodic function f(x) = sum_k a_k cos(2 pi <k, x> + phi_k) on R^m.
/// Frequencies are stored with first nonzero entry positive (sign folded into the
/// phase) and duplicates merged, so each frequency appears once.
class TrigPolynomial {
 public:
  TrigPolynomial(int m, std::vector<Harmonic> harmonics);

  int dim() const { return m_; }
  const std::vector<Harmonic>& harmonics() const { return harmonics_; }
  /// Largest |k|_2 over the harmonics, 0 for a constant.
  double maxFrequencyNorm() const;

  double evaluate(std::span<const double> x) const;
  RealVector gradient(std::span<const double> x) const;
  /// Row-major m x m.
  std::vector<double> hessian(std::span<const double> x) const;

  /// Copy with every amplitude scaled by (1 + factors[i]).
  TrigPolynomial withAmplitudeFactors(std::span<const double> factors) const;

 private:
  int m_;
  std::vector<Harmonic> harmonics_;
};

/// Value, gradient and Hessian of g at one point.
struct Jet2 {
  double value = 0.0;
  Point2 grad{};
  std::array<double, 3> hess{};  ///< (g11, g12, g22)
};

/// g(y) = f(x(y)) on an affine plane. Each harmonic is precomputed as
/// a cos(phase0 + <w, y>) with phase0 = 2 pi <k, x0> + phi and w = 2 pi (<k,u1>, <k,u2>).
class RestrictedFunction {
 public:
  RestrictedFunction(TrigPolynomial f, PlaneSpec plane);

  const TrigPolynomial& function() const { return f_; }
  const PlaneSpec& plane() const { return plane_; }

  double evaluate(const Point2& y) const;
  Point2 gradient(const Point2& y) const;
  /// Value and gradient in one pass.
  double valueAndGradient(const Point2& y, Point2& grad) const;
  Jet2 jet(const Point2& y) const;

  /// True when the gradient vanishes (< 1e-13) on a probe grid over one unit cell.
  bool isConstant() const;
  /// Largest in-plane frequency magnitude |w| / 2 pi.
  double maxPlaneFrequency() const;

 private:
  struct Term {
    double amplitude;
    double phase0;
    double w1;
    double w2;
  };
  TrigPolynomial f_;
  PlaneSpec plane_;
  std::vector<Term> terms_;
};

/// Throws DimensionMismatch when f and the plane differ in m.
RestrictedFunction restrict(const TrigPolynomial& f, const PlaneSpec& plane);

struct CriticalPoint2D {
  Point2 y{};
  double value = 0.0;
  int morseIndex = 0;  ///< number of negative Hessian eigenvalues
  double hessianDet = 0.0;
};

struct CriticalScan {
  std::vector<CriticalPoint2D> morse;      ///< sorted by value
  std::vector<CriticalPoint2D> nonMorse;   ///< |det H| <= 1e-10
  bool degenerate = false;                 ///< g constant; nothing to search
};

/// Newton on grad g = 0 seeded from every cell of [-L, L]^2 where both gradient
/// components change sign; converged points inside the window deduplicated within 1e-6.
CriticalScan findCriticalPoints(const RestrictedFunction& g, double window, double gridStep);

}  // namespace qlev

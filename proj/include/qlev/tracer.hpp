#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qlev/lattice.hpp"
#include "qlev/qpfunction.hpp"
#include "qlev/types.hpp"

namespace qlev {

enum class Termination { Closed, BudgetExhausted, NearCritical, LeftWindow };

std::string_view toString(Termination t);

struct TraceParams {
  double step = 0.01;        ///< nominal (maximum) arc step, plane units
  double closureTol = 1e-5;
  double sMin = 0.03;        ///< arc length before closure is tested
  double sMax = 1e4;         ///< arc-length budget
  double gradFloor = 1e-6;   ///< |grad g| below this aborts with NearCritical
  double maxTurn = 0.35;     ///< tangent turn per accepted step, radians
  int direction = 1;         ///< +1 follows rot90(grad g), -1 the reverse
  /// When set, tracing stops with LeftWindow once |y|_inf exceeds this.
  std::optional<double> window;
};

/// One traced component of {g = c}. Lifted points are computed on demand from the
/// plane the trajectory was traced on.
struct Trajectory {
  double level = 0.0;
  std::vector<Point2> points;
  double arcLength = 0.0;
  Termination termination = Termination::BudgetExhausted;
  PlaneSpec plane;

  RealVector lifted(std::size_t j) const { return plane.lift(points[j]); }
  /// Arc length from the start to point j, computed by summing chords.
  std::vector<double> cumulativeArc() const;
};

/// Continuation along y' = rot90(grad g) / |grad g| with Newton correction back to
/// the level after each step. The tangent keeps its orientation across steps, so a
/// curve passing through an isolated saddle continues straight on. Throws
/// SeedOffLevel when |g(seed) - c| >= 1e-8, StalledCorrection when a step cannot be
/// completed after twelve halvings.
Trajectory trace(const RestrictedFunction& g, double c, Point2 seed, const TraceParams& params = {});

/// Continues a BudgetExhausted trajectory from its last point until params.sMax.
/// Anything else is left untouched.
void extendTrace(const RestrictedFunction& g, Trajectory& trajectory, const TraceParams& params);

/// A component restricted to the window [-L, L]^2: traced forward and, unless it
/// closes, backward until it leaves the window. End points are clipped to the box.
struct WindowComponent {
  Point2 seed{};
  std::vector<Point2> polyline;
  bool closed = false;
  bool nearCritical = false;
  std::vector<long> edges;  ///< sorted ids of the sign-change grid edges the piece crosses
};

/// One component per connected piece of {g = c} inside the window, seeded from
/// sign-change grid edges refined by bisection to |g - c| < 1e-10. Throws EmptyLevel
/// when no grid edge changes sign.
std::vector<WindowComponent> findWindowComponents(const RestrictedFunction& g, double c, double window,
                                                  double gridStep, const TraceParams& params = {});

/// Ids of the window grid edges crossed by a polyline, numbered as in WindowComponent::edges.
std::vector<long> crossedGridEdges(std::span<const Point2> polyline, double window, double gridStep);

/// Seeds of findWindowComponents, one per piece.
std::vector<Point2> findSeeds(const RestrictedFunction& g, double c, double window, double gridStep,
                              const TraceParams& params = {});

struct GridComponent {
  std::vector<Point2> polyline;
  bool closed = false;
  bool touchesBoundary = false;
};

/// Cell-by-cell contour extraction with linear edge interpolation. Saddle cells are
/// resolved by the sign of g at the cell center.
std::vector<GridComponent> marchingSquares(const RestrictedFunction& g, double c, double window,
                                           double gridStep);

/// Symmetric Hausdorff distance between two polylines (vertices against segments).
double hausdorffDistance(const std::vector<Point2>& a, const std::vector<Point2>& b);

}  // namespace qlev

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qlev/lattice.hpp"
#include "qlev/qpfunction.hpp"
#include "qlev/tracer.hpp"

namespace qlev {

/// Minimal-width strip containing a point set.
struct StripFit {
  Point2 direction2{};       ///< unit, angle in [0, pi)
  double width = 0.0;
  RealVector liftedDirection;  ///< direction2 through the plane basis; empty for bare point sets
};

/// Convex hull (counterclockwise, no collinear vertices).
std::vector<Point2> convexHull(std::vector<Point2> points);

/// Exact minimum width via convex hull and rotating calipers; ties within 1e-12
/// relative go to the smallest direction angle. Throws DegeneratePointSet when all
/// points coincide.
StripFit stripFit(std::span<const Point2> points);
StripFit stripFit(std::span<const Point2> points, const PlaneSpec& plane);

struct ClassifierConfig {
  double ratioTol = 1.1;        ///< widthFull / widthHalf bound for saturation
  int maxNorm = 10;             ///< integer normal search box
  double tol = 1e-3;            ///< direction residual bound for integer normals
  double minArc = 100.0;        ///< arc length required before judging openness
  double growthTol = 0.1;       ///< boundedness certificate bound
  double ambiguityRatio = 10.0; ///< runner-up residual must exceed this multiple
};

struct WidthCheck {
  bool converged = false;
  double widthHalf = 0.0;
  double widthFull = 0.0;
  double extent = 0.0;  ///< length of the full point set along the fitted direction
};

/// Width of the first half (by arc length) against the whole. Trajectories that are
/// not BudgetExhausted or are shorter than minArc never converge. Widths under 1e-8 count as zero.
WidthCheck widthConverged(const Trajectory& trajectory, double ratioTol, double minArc = 100.0);

enum class LabelKind { Compact, OpenStrip, Unresolved };
enum class Cause { None, NearCritical, LeftWindow, TooShort, WidthNotConverged, StalledCorrection,
                   NoCandidate, AmbiguousLabel, BoundednessViolation };

std::string_view toString(LabelKind k);
std::string_view toString(Cause c);

struct StripLabel {
  LabelKind kind = LabelKind::Unresolved;
  Cause cause = Cause::None;           ///< why Unresolved, or why an OpenStrip has no normal
  std::optional<StripFit> fit;
  WidthCheck width;
  std::vector<NormalCandidate> normals;  ///< best first
  int orientationSign = 0;             ///< traversal vs canonical strip direction
  double arcLength = 0.0;
  Point2 seed{};
  RealVector liftedSeed;
  /// True once normals holds the unique multi-direction label rather than the
  /// candidates of a single direction.
  bool normalResolved = false;
  /// Lifted convex-hull vertices of the first half and of the whole trajectory;
  /// the range of any linear functional over the points is attained on these.
  std::vector<RealVector> liftedHullHalf;
  std::vector<RealVector> liftedHullFull;

  const NormalCandidate* best() const { return normals.empty() ? nullptr : &normals.front(); }
};

/// Closed -> Compact; BudgetExhausted with saturated width -> OpenStrip; otherwise
/// Unresolved with the failing test recorded. OpenStrip labels carry the candidate
/// normals of their single direction, which is rarely unique.
StripLabel classify(const Trajectory& trajectory, const ClassifierConfig& cfg = {});

/// (range of <n, x> over the whole) / (range over the first half) - 1.
double boundednessGrowth(const StripLabel& label, const IntegerVector& n);

struct LabelResult {
  IntegerVector normal;
  double residual = 0.0;
  std::optional<double> runnerUpResidual;
  std::size_t directionCount = 0;
};

/// Unique integral normal shared by the directions. Throws NoCandidate when nothing
/// fits and AmbiguousLabel when the runner-up residual is within ambiguityRatio of the best.
LabelResult labelFromDirections(std::span<const RealVector> dirs, const ClassifierConfig& cfg);

/// Everything needed to trace and classify the level set on one plane.
struct LevelSetConfig {
  TraceParams trace;
  ClassifierConfig classify;
  double window = 1.0;    ///< seeds are taken from [-window, window]^2
  double gridStep = 0.05;
  /// When positive, budgets start here and double up to trace.sMax while the width
  /// grows or an open fit is shorter than width / directionTol along its direction.
  double initialArc = 0.0;
  double directionTol = 0.02;
};

/// Trace from the seed and classify. A stalled trace becomes Unresolved{StalledCorrection}.
/// The final trajectory is moved into keep when given.
StripLabel traceAndClassify(const RestrictedFunction& g, double c, Point2 seed, const LevelSetConfig& cfg,
                            Trajectory* keep = nullptr);

/// The level set on one plane: window pieces, one label per component, and for
/// each piece the index of its component's label (-1 only for empty levels).
struct LevelAnalysis {
  PlaneSpec plane;
  double level = 0.0;
  std::vector<WindowComponent> pieces;
  std::vector<StripLabel> labels;
  std::vector<int> pieceLabel;
};

/// Seeds in the window, full traces, classification, one label per component met in
/// the window. An empty level yields no pieces and no labels. When keep is given it
/// receives the final trajectory of each label, in label order.
LevelAnalysis analyzeLevel(const RestrictedFunction& g, double c, const LevelSetConfig& cfg,
                           std::vector<Trajectory>* keep = nullptr);

/// The labels of analyzeLevel.
std::vector<StripLabel> classifyLevel(const RestrictedFunction& g, double c, const LevelSetConfig& cfg);

/// Label index of the component through the level point y, found by a windowed trace
/// from y and matching grid edges. A point outside the window is first carried back in
/// along the curve. -1 when that fails or nothing matches.
int componentAt(const RestrictedFunction& g, const LevelAnalysis& analysis, Point2 y, const LevelSetConfig& cfg);

/// Forms perturbed by magnitude * (random unit generator orthogonal to the base forms),
/// offsets kept. Deterministic in seed.
std::vector<PlaneSpec> perturbationFamily(const PlaneSpec& base, double magnitude, int count,
                                          std::uint64_t seed);

struct PerturbationLabel {
  LabelResult result;
  std::vector<StripLabel> openLabels;   ///< every open trajectory that contributed a direction
  std::vector<LevelAnalysis> analyses;  ///< base plane first, then the perturbed planes
};

/// Collects open-trajectory directions at level c on the base plane and every
/// perturbed plane, then extracts the common integral normal. Verifies the
/// boundedness certificate on each contributing trajectory (BoundednessViolation).
/// Needs at least three perturbed planes with open trajectories (NoCandidate otherwise).
PerturbationLabel labelByPerturbation(const TrigPolynomial& f, const PlaneSpec& basePlane, double c,
                                      std::span<const PlaneSpec> perturbations, const LevelSetConfig& cfg);

/// Follows one open trajectory onto each other plane (nearest point, corrected to the
/// level), looks up or traces the component found there, and labels the trajectory
/// from the combined directions. On success the label's normals hold the unique
/// result; on failure the label becomes Unresolved with the cause.
void labelByTransport(const TrigPolynomial& f, double c, std::span<const LevelAnalysis> others,
                      const LevelSetConfig& cfg, StripLabel& label);
void labelByTransport(const TrigPolynomial& f, double c, std::span<const PlaneSpec> perturbations,
                      const LevelSetConfig& cfg, StripLabel& label);

/// Every label of every plane in the family, open ones resolved by transport to the
/// other planes of the family.
std::vector<StripLabel> transportLabels(const TrigPolynomial& f, double c, std::span<const LevelAnalysis> family,
                                        const LevelSetConfig& cfg);

struct LevelReport {
  double level = 0.0;
  std::vector<StripLabel> labels;
  bool consistent = true;
  std::optional<IntegerVector> sharedNormal;
  int positiveCount = 0;
  int negativeCount = 0;
  bool signBalanced = true;
};

/// Consistent iff every OpenStrip label carries a best normal and all coincide.
LevelReport levelConsistency(double level, std::vector<StripLabel> labels);

}  // namespace qlev

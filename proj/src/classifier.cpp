#include "qlev/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "qlev/error.hpp"

namespace qlev {

std::string_view toString(LabelKind k) {
  switch (k) {
    case LabelKind::Compact: return "Compact";
    case LabelKind::OpenStrip: return "OpenStrip";
    case LabelKind::Unresolved: return "Unresolved";
  }
  return "Unknown";
}

std::string_view toString(Cause c) {
  switch (c) {
    case Cause::None: return "None";
    case Cause::NearCritical: return "NearCritical";
    case Cause::LeftWindow: return "LeftWindow";
    case Cause::TooShort: return "TooShort";
    case Cause::WidthNotConverged: return "WidthNotConverged";
    case Cause::StalledCorrection: return "StalledCorrection";
    case Cause::NoCandidate: return "NoCandidate";
    case Cause::AmbiguousLabel: return "AmbiguousLabel";
    case Cause::BoundednessViolation: return "BoundednessViolation";
  }
  return "Unknown";
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

Point2 canonicalDirection(Point2 d) {
  const double n = norm2(d);
  d = {d[0] / n, d[1] / n};
  if (d[1] < 0.0 || (d[1] == 0.0 && d[0] < 0.0)) d = {-d[0], -d[1]};
  return d;
}

double angleOf(const Point2& d) { return std::atan2(d[1], d[0]); }

// Minimum width over the edges of a counterclockwise hull.
StripFit fitHull(const std::vector<Point2>& hull) {
  if (hull.size() < 2) throw Error(ErrorCode::DegeneratePointSet, "stripFit: all points coincide");
  StripFit fit;
  if (hull.size() == 2) {
    fit.direction2 = canonicalDirection(sub2(hull[1], hull[0]));
    fit.width = 0.0;
    return fit;
  }
  const std::size_t h = hull.size();
  std::vector<double> widths(h);
  std::size_t j = 1;
  for (std::size_t i = 0; i < h; ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % h];
    while (cross(a, b, hull[(j + 1) % h]) >= cross(a, b, hull[j % h])) {
      j = (j + 1) % h;
      if (j == i) break;
    }
    widths[i] = cross(a, b, hull[j % h]) / dist2(a, b);
  }
  const double best = *std::min_element(widths.begin(), widths.end());
  const double tieTol = 1e-12 * std::max(1.0, best);
  bool have = false;
  for (std::size_t i = 0; i < h; ++i) {
    if (widths[i] > best + tieTol) continue;
    const Point2 d = canonicalDirection(sub2(hull[(i + 1) % h], hull[i]));
    if (!have || angleOf(d) < angleOf(fit.direction2)) {
      fit.direction2 = d;
      have = true;
    }
  }
  // Report the width actually realized by the chosen direction.
  const Point2 normal = rot90(fit.direction2);
  double lo = dot2(hull[0], normal);
  double hi = lo;
  for (const auto& p : hull) {
    lo = std::min(lo, dot2(p, normal));
    hi = std::max(hi, dot2(p, normal));
  }
  fit.width = hi - lo;
  return fit;
}

}  // namespace

std::vector<Point2> convexHull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

StripFit stripFit(std::span<const Point2> points) {
  if (points.empty()) throw Error(ErrorCode::DegeneratePointSet, "stripFit: no points");
  return fitHull(convexHull(std::vector<Point2>(points.begin(), points.end())));
}

StripFit stripFit(std::span<const Point2> points, const PlaneSpec& plane) {
  StripFit fit = stripFit(points);
  fit.liftedDirection = plane.toAmbient(fit.direction2);
  return fit;
}

namespace {

struct HalfHulls {
  std::vector<Point2> half;
  std::vector<Point2> full;
};

HalfHulls hullsOf(const Trajectory& t) {
  const auto arc = t.cumulativeArc();
  const double halfArc = 0.5 * arc.back();
  const auto split = static_cast<std::size_t>(std::upper_bound(arc.begin(), arc.end(), halfArc) - arc.begin());
  HalfHulls h;
  h.half = convexHull(std::vector<Point2>(t.points.begin(), t.points.begin() + static_cast<std::ptrdiff_t>(split)));
  std::vector<Point2> rest = h.half;
  rest.insert(rest.end(), t.points.begin() + static_cast<std::ptrdiff_t>(split), t.points.end());
  h.full = convexHull(std::move(rest));
  return h;
}

// Widths below this count as zero: samples right next to a saddle on the level sit this far off a line.
constexpr double kWidthFloor = 1e-8;

WidthCheck checkWidths(const HalfHulls& h, double ratioTol) {
  WidthCheck w;
  const StripFit half = fitHull(h.half);
  const StripFit full = fitHull(h.full);
  w.widthHalf = half.width;
  w.widthFull = full.width;
  w.converged = w.widthFull / std::max(w.widthHalf, kWidthFloor) <= ratioTol;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : h.full) {
    lo = std::min(lo, dot2(p, full.direction2));
    hi = std::max(hi, dot2(p, full.direction2));
  }
  w.extent = hi - lo;
  return w;
}

}  // namespace

WidthCheck widthConverged(const Trajectory& trajectory, double ratioTol, double minArc) {
  if (trajectory.termination != Termination::BudgetExhausted || trajectory.arcLength < minArc ||
      trajectory.points.size() < 4) {
    return {};
  }
  return checkWidths(hullsOf(trajectory), ratioTol);
}

StripLabel classify(const Trajectory& trajectory, const ClassifierConfig& cfg) {
  StripLabel label;
  label.arcLength = trajectory.arcLength;
  if (!trajectory.points.empty()) {
    label.seed = trajectory.points.front();
    label.liftedSeed = trajectory.lifted(0);
  }
  switch (trajectory.termination) {
    case Termination::Closed:
      label.kind = LabelKind::Compact;
      return label;
    case Termination::NearCritical:
      label.cause = Cause::NearCritical;
      return label;
    case Termination::LeftWindow:
      label.cause = Cause::LeftWindow;
      return label;
    case Termination::BudgetExhausted:
      break;
  }
  if (trajectory.arcLength < cfg.minArc || trajectory.points.size() < 4) {
    label.cause = Cause::TooShort;
    return label;
  }
  const HalfHulls hulls = hullsOf(trajectory);
  label.width = checkWidths(hulls, cfg.ratioTol);
  if (!label.width.converged) {
    label.cause = Cause::WidthNotConverged;
    return label;
  }
  StripFit fit = fitHull(hulls.full);
  fit.liftedDirection = trajectory.plane.toAmbient(fit.direction2);
  const Point2 traversal = sub2(trajectory.points.back(), trajectory.points.front());
  const double along = dot2(traversal, fit.direction2);
  label.orientationSign = (along >= 0.0 ? 1 : -1) * canonicalSign(fit.liftedDirection, 1e-12);

  for (const auto& p : hulls.half) label.liftedHullHalf.push_back(trajectory.plane.lift(p));
  for (const auto& p : hulls.full) label.liftedHullFull.push_back(trajectory.plane.lift(p));

  const std::vector<RealVector> one{fit.liftedDirection};
  label.normals = rationalizeCommonNormal(one, cfg.maxNorm, cfg.tol);
  if (label.normals.size() > 8) label.normals.resize(8);
  label.fit = std::move(fit);
  label.kind = LabelKind::OpenStrip;
  return label;
}

double boundednessGrowth(const StripLabel& label, const IntegerVector& n) {
  const RealVector nr = n.toReal();
  auto range = [&](const std::vector<RealVector>& pts) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& x : pts) {
      const double v = dot(nr, x);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  };
  if (label.liftedHullHalf.empty() || label.liftedHullFull.empty()) {
    throw Error(ErrorCode::EmptyInput, "boundednessGrowth: label has no hull");
  }
  const double half = range(label.liftedHullHalf);
  const double full = range(label.liftedHullFull);
  return std::max(full, 1e-9) / std::max(half, 1e-9) - 1.0;
}

LabelResult labelFromDirections(std::span<const RealVector> dirs, const ClassifierConfig& cfg) {
  const auto candidates = rationalizeCommonNormal(dirs, cfg.maxNorm, cfg.tol);
  if (candidates.empty()) {
    throw Error(ErrorCode::NoCandidate,
                fmt::format("no primitive normal with |n|_inf <= {} fits {} directions within {:.1e}", cfg.maxNorm,
                            dirs.size(), cfg.tol));
  }
  LabelResult r;
  r.normal = candidates.front().normal;
  r.residual = candidates.front().residual;
  r.directionCount = dirs.size();
  if (candidates.size() > 1) {
    r.runnerUpResidual = candidates[1].residual;
    if (candidates[1].residual < cfg.ambiguityRatio * std::max(r.residual, 1e-14)) {
      throw Error(ErrorCode::AmbiguousLabel,
                  fmt::format("normals {} (residual {:.2e}) and {} (residual {:.2e}) are not separated",
                              r.normal.str(), r.residual, candidates[1].normal.str(), candidates[1].residual));
    }
  }
  return r;
}

StripLabel traceAndClassify(const RestrictedFunction& g, double c, Point2 seed, const LevelSetConfig& cfg,
                            Trajectory* keep) {
  StripLabel label;
  Trajectory traj;
  try {
    if (cfg.initialArc > 0.0 && cfg.initialArc < cfg.trace.sMax) {
      TraceParams params = cfg.trace;
      params.sMax = cfg.initialArc;
      traj = trace(g, c, seed, params);
      label = classify(traj, cfg.classify);
      auto settled = [&] {
        if (label.cause == Cause::WidthNotConverged) return false;
        return label.kind != LabelKind::OpenStrip || label.width.widthFull <= cfg.directionTol * label.width.extent;
      };
      while (!settled() && params.sMax < cfg.trace.sMax) {
        params.sMax = std::min(2.0 * params.sMax, cfg.trace.sMax);
        extendTrace(g, traj, params);
        label = classify(traj, cfg.classify);
      }
    } else {
      traj = trace(g, c, seed, cfg.trace);
      label = classify(traj, cfg.classify);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StalledCorrection) throw;
    label = StripLabel{};
    label.seed = seed;
    label.liftedSeed = g.plane().lift(seed);
    label.cause = Cause::StalledCorrection;
    traj = Trajectory{};
  }
  if (keep != nullptr) *keep = std::move(traj);
  return label;
}

namespace {

bool meets(const std::vector<long>& a, const std::vector<long>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

}  // namespace

LevelAnalysis analyzeLevel(const RestrictedFunction& g, double c, const LevelSetConfig& cfg,
                           std::vector<Trajectory>* keep) {
  LevelAnalysis out;
  out.plane = g.plane();
  out.level = c;
  try {
    out.pieces = findWindowComponents(g, c, cfg.window, cfg.gridStep, cfg.trace);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyLevel) throw;
    return out;
  }
  // One label per component: pieces the full trace runs through are skipped, and a
  // trace that runs into an earlier piece duplicates that piece's component.
  out.pieceLabel.assign(out.pieces.size(), -1);
  for (std::size_t k = 0; k < out.pieces.size(); ++k) {
    if (out.pieceLabel[k] >= 0) continue;
    Trajectory traj;
    StripLabel label = traceAndClassify(g, c, out.pieces[k].seed, cfg, &traj);
    auto index = static_cast<int>(out.labels.size());
    std::vector<std::size_t> met{k};
    if (traj.points.size() >= 2) {
      const auto edges = crossedGridEdges(traj.points, cfg.window, cfg.gridStep);
      for (std::size_t j = 0; j < out.pieces.size(); ++j) {
        if (j == k || !meets(edges, out.pieces[j].edges)) continue;
        if (out.pieceLabel[j] >= 0 && index == static_cast<int>(out.labels.size())) index = out.pieceLabel[j];
        met.push_back(j);
      }
    }
    for (std::size_t j : met) {
      if (out.pieceLabel[j] < 0) out.pieceLabel[j] = index;
    }
    if (index == static_cast<int>(out.labels.size())) {
      out.labels.push_back(std::move(label));
      if (keep) keep->push_back(std::move(traj));
    }
  }
  return out;
}

std::vector<StripLabel> classifyLevel(const RestrictedFunction& g, double c, const LevelSetConfig& cfg) {
  return analyzeLevel(g, c, cfg).labels;
}

int componentAt(const RestrictedFunction& g, const LevelAnalysis& analysis, Point2 y, const LevelSetConfig& cfg) {
  if (analysis.pieces.empty()) return -1;
  auto inside = [&](const Point2& p) { return std::max(std::abs(p[0]), std::abs(p[1])) <= cfg.window - cfg.gridStep; };
  if (!inside(y)) {
    // Follow the curve a little way in either direction to get back into the window.
    TraceParams probe = cfg.trace;
    probe.sMax = 8.0 * cfg.window;
    std::optional<Point2> entry;
    for (int direction : {1, -1}) {
      probe.direction = direction;
      try {
        const Trajectory t = trace(g, analysis.level, y, probe);
        const auto it = std::find_if(t.points.begin(), t.points.end(), inside);
        if (it != t.points.end()) entry = *it;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::StalledCorrection) throw;
      }
      if (entry) break;
    }
    if (!entry) return -1;
    y = *entry;
  }
  TraceParams windowed = cfg.trace;
  windowed.window = cfg.window;
  windowed.sMax = std::min(cfg.trace.sMax, 64.0 * cfg.window * cfg.window / std::max(cfg.trace.step, 1e-6) + 100.0);
  std::vector<Point2> polyline;
  try {
    windowed.direction = 1;
    Trajectory fwd = trace(g, analysis.level, y, windowed);
    polyline = std::move(fwd.points);
    if (fwd.termination != Termination::Closed) {
      windowed.direction = -1;
      Trajectory bwd = trace(g, analysis.level, y, windowed);
      polyline.insert(polyline.begin(), bwd.points.rbegin(), bwd.points.rend() - 1);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StalledCorrection) throw;
    return -1;
  }
  const auto edges = crossedGridEdges(polyline, cfg.window, cfg.gridStep);
  for (std::size_t k = 0; k < analysis.pieces.size(); ++k) {
    if (meets(edges, analysis.pieces[k].edges)) return analysis.pieceLabel[k];
  }
  return -1;
}

std::vector<PlaneSpec> perturbationFamily(const PlaneSpec& base, double magnitude, int count,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  // Orthonormal basis of the span of the base forms.
  std::vector<RealVector> span;
  for (const auto& form : base.forms) {
    RealVector q = form.coefficients;
    for (const auto& e : span) {
      const double a = dot(q, e);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] -= a * e[i];
    }
    const double n = norm(q);
    if (n > 1e-12) {
      for (auto& x : q) x /= n;
      span.push_back(std::move(q));
    }
  }
  std::vector<PlaneSpec> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count && attempts++ < 100 * count) {
    std::vector<LinearForm> forms;
    bool usable = true;
    for (const auto& form : base.forms) {
      RealVector gen(form.coefficients.size());
      for (auto& x : gen) x = uni(rng);
      // Components along the forms only rescale them; keep the part that tilts the plane.
      for (const auto& q : span) {
        const double a = dot(gen, q);
        for (std::size_t i = 0; i < gen.size(); ++i) gen[i] -= a * q[i];
      }
      const double n = norm(gen);
      if (!(n > 1e-6)) {
        usable = false;
        break;
      }
      for (auto& x : gen) x /= n;
      forms.push_back(form.perturbed(LinearForm{gen, std::nullopt}, magnitude));
    }
    if (!usable) continue;
    try {
      out.push_back(buildPlane(std::move(forms), base.offsets));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegeneratePlane) throw;
    }
  }
  return out;
}

PerturbationLabel labelByPerturbation(const TrigPolynomial& f, const PlaneSpec& basePlane, double c,
                                      std::span<const PlaneSpec> perturbations, const LevelSetConfig& cfg) {
  PerturbationLabel out;
  out.analyses.push_back(analyzeLevel(restrict(f, basePlane), c, cfg));
  for (const auto& p : perturbations) out.analyses.push_back(analyzeLevel(restrict(f, p), c, cfg));

  std::vector<RealVector> dirs;
  int planesWithOpen = 0;
  for (std::size_t k = 0; k < out.analyses.size(); ++k) {
    bool any = false;
    for (const auto& label : out.analyses[k].labels) {
      if (label.kind != LabelKind::OpenStrip) continue;
      dirs.push_back(label.fit->liftedDirection);
      out.openLabels.push_back(label);
      any = true;
    }
    if (k > 0 && any) ++planesWithOpen;
  }
  if (planesWithOpen < 3) {
    throw Error(ErrorCode::NoCandidate,
                fmt::format("only {} perturbed planes produced open trajectories at level {}, need 3", planesWithOpen, c));
  }
  out.result = labelFromDirections(dirs, cfg.classify);
  for (const auto& label : out.openLabels) {
    const double growth = boundednessGrowth(label, out.result.normal);
    if (!(growth < cfg.classify.growthTol)) {
      throw Error(ErrorCode::BoundednessViolation,
                  fmt::format("<n, x> range grows by {:.1f}% for normal {}", 100.0 * growth, out.result.normal.str()));
    }
  }
  return out;
}

namespace {

// Newton along the gradient from y onto {g = c}.
std::optional<Point2> projectToLevel(const RestrictedFunction& g, double c, Point2 y, double maxMove) {
  const Point2 start = y;
  for (int it = 0; it < 30; ++it) {
    Point2 grad{};
    const double r = g.valueAndGradient(y, grad) - c;
    if (std::abs(r) < 1e-10) {
      if (dist2(y, start) > maxMove) return std::nullopt;
      return y;
    }
    const double gg = dot2(grad, grad);
    if (gg < 1e-12) return std::nullopt;
    double s = r / gg;
    // Damp long jumps so the walk stays on the nearby branch.
    const double len = std::abs(s) * std::sqrt(gg);
    if (len > 0.02) s *= 0.02 / len;
    y = {y[0] - s * grad[0], y[1] - s * grad[1]};
  }
  return std::nullopt;
}

}  // namespace

void labelByTransport(const TrigPolynomial& f, double c, std::span<const LevelAnalysis> others,
                      const LevelSetConfig& cfg, StripLabel& label) {
  if (label.kind != LabelKind::OpenStrip) return;
  std::vector<RealVector> dirs{label.fit->liftedDirection};
  std::vector<StripLabel> transported;
  for (const auto& other : others) {
    const RestrictedFunction g = restrict(f, other.plane);
    const auto y = projectToLevel(g, c, other.plane.project(label.liftedSeed), 0.25);
    if (!y) continue;
    const int known = componentAt(g, other, *y, cfg);
    StripLabel t = known >= 0 ? other.labels[static_cast<std::size_t>(known)] : traceAndClassify(g, c, *y, cfg);
    if (t.kind != LabelKind::OpenStrip) continue;
    dirs.push_back(t.fit->liftedDirection);
    transported.push_back(std::move(t));
  }
  label.normalResolved = false;
  // Width saturation alone does not certify the strip.
  auto fail = [&](Cause cause) {
    label.kind = LabelKind::Unresolved;
    label.cause = cause;
    label.normals.clear();
  };
  if (transported.size() < 3) {
    fail(Cause::NoCandidate);
    return;
  }
  try {
    const LabelResult r = labelFromDirections(dirs, cfg.classify);
    const bool bounded = boundednessGrowth(label, r.normal) < cfg.classify.growthTol &&
                         std::all_of(transported.begin(), transported.end(), [&](const StripLabel& t) {
                           return boundednessGrowth(t, r.normal) < cfg.classify.growthTol;
                         });
    if (!bounded) {
      fail(Cause::BoundednessViolation);
      return;
    }
    label.normals = {NormalCandidate{r.normal, r.residual}};
    label.normalResolved = true;
    label.cause = Cause::None;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::AmbiguousLabel) {
      fail(Cause::AmbiguousLabel);
    } else if (e.code() == ErrorCode::NoCandidate) {
      fail(Cause::NoCandidate);
    } else {
      throw;
    }
  }
}

void labelByTransport(const TrigPolynomial& f, double c, std::span<const PlaneSpec> perturbations,
                      const LevelSetConfig& cfg, StripLabel& label) {
  std::vector<LevelAnalysis> others;
  for (const auto& p : perturbations) others.push_back(analyzeLevel(restrict(f, p), c, cfg));
  labelByTransport(f, c, others, cfg, label);
}

std::vector<StripLabel> transportLabels(const TrigPolynomial& f, double c, std::span<const LevelAnalysis> family,
                                        const LevelSetConfig& cfg) {
  std::vector<StripLabel> out;
  for (std::size_t k = 0; k < family.size(); ++k) {
    std::vector<LevelAnalysis> others;
    for (std::size_t j = 0; j < family.size(); ++j) {
      if (j != k) others.push_back(family[j]);
    }
    for (StripLabel label : family[k].labels) {
      labelByTransport(f, c, others, cfg, label);
      out.push_back(std::move(label));
    }
  }
  return out;
}

LevelReport levelConsistency(double level, std::vector<StripLabel> labels) {
  LevelReport report;
  report.level = level;
  for (const auto& label : labels) {
    if (label.kind != LabelKind::OpenStrip) continue;
    if (label.orientationSign > 0) ++report.positiveCount;
    if (label.orientationSign < 0) ++report.negativeCount;
    if (!label.normalResolved || label.best() == nullptr) {
      report.consistent = false;
      continue;
    }
    const IntegerVector n = primitiveNormalize(label.best()->normal);
    if (!report.sharedNormal) {
      report.sharedNormal = n;
    } else if (*report.sharedNormal != n) {
      report.consistent = false;
    }
  }
  if (!report.consistent) report.sharedNormal.reset();
  report.signBalanced = report.positiveCount == report.negativeCount;
  report.labels = std::move(labels);
  return report;
}

}  // namespace qlev

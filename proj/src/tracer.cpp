#include "qlev/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "qlev/error.hpp"

namespace qlev {

std::string_view toString(Termination t) {
  switch (t) {
    case Termination::Closed: return "Closed";
    case Termination::BudgetExhausted: return "BudgetExhausted";
    case Termination::NearCritical: return "NearCritical";
    case Termination::LeftWindow: return "LeftWindow";
  }
  return "Unknown";
}

std::vector<double> Trajectory::cumulativeArc() const {
  std::vector<double> s(points.size(), 0.0);
  for (std::size_t j = 1; j < points.size(); ++j) s[j] = s[j - 1] + dist2(points[j - 1], points[j]);
  return s;
}

namespace {

constexpr double kLevelTol = 1e-10;
constexpr int kMaxHalvings = 12;
constexpr double kStepTurnFraction = 0.6;

Point2 unit(const Point2& v) {
  const double n = norm2(v);
  return {v[0] / n, v[1] / n};
}

class Continuation {
 public:
  Continuation(const RestrictedFunction& g, double c, const TraceParams& p) : g_(g), c_(c), p_(p) {}

  // Newton along the gradient back to the level. Fails on tiny gradients, slow
  // convergence, or when the point wanders further than maxMove.
  bool correct(Point2& q, Point2& grad, double maxMove) const {
    const Point2 start = q;
    for (int it = 0; it < 12; ++it) {
      const double r = g_.valueAndGradient(q, grad) - c_;
      const double gg = dot2(grad, grad);
      if (std::abs(r) < kLevelTol) {
        // One more step brings the offset |r| / |grad| to rounding level, even next to a saddle.
        if (gg >= p_.gradFloor * p_.gradFloor) {
          const Point2 p{q[0] - r * grad[0] / gg, q[1] - r * grad[1] / gg};
          Point2 gp{};
          const double rp = g_.valueAndGradient(p, gp) - c_;
          if (std::abs(rp) <= std::abs(r)) {
            q = p;
            grad = gp;
          }
        }
        return dist2(q, start) <= maxMove;
      }
      if (gg < p_.gradFloor * p_.gradFloor) return false;
      q = {q[0] - r * grad[0] / gg, q[1] - r * grad[1] / gg};
    }
    return false;
  }

  Point2 tangent(const Point2& grad, const Point2& previous) const {
    Point2 t = unit(rot90(grad));
    if (dot2(t, previous) < 0.0) t = {-t[0], -t[1]};
    return t;
  }

  // Walks from y toward the seed with steps of length |seed - y| until within closureTol.
  std::optional<Point2> tryClose(Point2 y, Point2 t, const Point2& seed) const {
    for (int k = 0; k < 8; ++k) {
      const double d = dist2(seed, y);
      if (d < p_.closureTol * 1e-4) break;
      Point2 q{y[0] + d * t[0], y[1] + d * t[1]};
      Point2 grad{};
      if (!correct(q, grad, 0.5 * d + 1e-12)) return std::nullopt;
      if (norm2(grad) < p_.gradFloor) return std::nullopt;
      t = tangent(grad, t);
      y = q;
    }
    if (dist2(seed, y) < p_.closureTol) return y;
    return std::nullopt;
  }

  struct State {
    Point2 y{};
    Point2 t{};
    double orient = 1.0;
    Point2 y0{};
    Point2 t0{};
  };

  Trajectory run(Point2 seed) const {
    Trajectory traj;
    traj.level = c_;
    traj.plane = g_.plane();

    Point2 grad{};
    const double v = g_.valueAndGradient(seed, grad);
    if (!(std::abs(v - c_) < 1e-8)) {
      throw Error(ErrorCode::SeedOffLevel, fmt::format("trace: |g(seed) - c| = {:.3e}", std::abs(v - c_)));
    }
    Point2 y = seed;
    if (!correct(y, grad, 1e-6)) {
      y = seed;
      g_.valueAndGradient(y, grad);
    }
    traj.points.push_back(y);
    if (norm2(grad) <= p_.gradFloor) {
      traj.termination = Termination::NearCritical;
      return traj;
    }
    const double sign = p_.direction >= 0 ? 1.0 : -1.0;
    Point2 t = unit(rot90(grad));
    t = {sign * t[0], sign * t[1]};
    advance(traj, State{y, t, sign, y, t});
    return traj;
  }

  // Picks up a BudgetExhausted trajectory at its last point, heading along the last chord.
  void resume(Trajectory& traj) const {
    const auto& pts = traj.points;
    Point2 g0{};
    Point2 g1{};
    g_.valueAndGradient(pts.front(), g0);
    g_.valueAndGradient(pts.back(), g1);
    const Point2 t0 = tangent(g0, unit(sub2(pts[1], pts[0])));
    const Point2 t = tangent(g1, unit(sub2(pts.back(), pts[pts.size() - 2])));
    const double orient = dot2(rot90(g1), t) >= 0.0 ? 1.0 : -1.0;
    advance(traj, State{pts.back(), t, orient, pts.front(), t0});
  }

 private:
  // From a critical point c on the level, one full step straight on along t. Succeeds
  // when it lands on a regular part of the level still heading along t.
  bool bridge(const Point2& y, const Point2& t, Point2& q, Point2& tn, double& orient) const {
    Point2 b{q[0] + p_.step * t[0], q[1] + p_.step * t[1]};
    Point2 grad{};
    if (!correct(b, grad, 0.3 * p_.step)) return false;
    if (norm2(grad) < p_.gradFloor) return false;
    const Point2 tb = tangent(grad, t);
    const double cosTurn = std::cos(p_.maxTurn);
    if (dot2(tb, t) < cosTurn || dot2(unit(sub2(b, y)), t) < cosTurn) return false;
    if (orient * dot2(rot90(grad), tb) < 0.0) orient = -orient;
    q = b;
    tn = tb;
    return true;
  }

  // Step length from the curvature at y alone, so that nearby runs sample alike.
  double stepAt(const Point2& y, const Point2& t) const {
    const Jet2 j = g_.jet(y);
    const double gn = norm2(j.grad);
    const double tht = j.hess[0] * t[0] * t[0] + 2.0 * j.hess[1] * t[0] * t[1] + j.hess[2] * t[1] * t[1];
    const double kappa = std::abs(tht) / std::max(gn, p_.gradFloor);
    const double h = kStepTurnFraction * p_.maxTurn / std::max(kappa, 1e-300);
    return std::clamp(h, p_.step / 64.0, p_.step);
  }

  void advance(Trajectory& traj, State st) const {
    Point2 y = st.y;
    Point2 t = st.t;
    double orient = st.orient;
    const Point2 y0 = st.y0;
    const Point2 t0 = st.t0;
    Point2 grad{};
    const double closeRadius = 1.5 * p_.step;

    while (true) {
      if (traj.arcLength >= p_.sMax) {
        traj.termination = Termination::BudgetExhausted;
        return;
      }
      if (traj.arcLength >= p_.sMin) {
        const Point2 d = sub2(y0, y);
        if (norm2(d) <= closeRadius && dot2(d, t) > 0.0 && dot2(t, t0) > 0.0) {
          if (auto end = tryClose(y, t, y0)) {
            traj.arcLength += dist2(y, *end);
            traj.points.push_back(*end);
            traj.termination = Termination::Closed;
            return;
          }
        }
      }

      double h = stepAt(y, t);
      Point2 q{};
      Point2 tn{};
      bool accepted = false;
      for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, h *= 0.5) {
        q = {y[0] + h * t[0], y[1] + h * t[1]};
        if (!correct(q, grad, 0.3 * h)) continue;
        if (norm2(grad) < p_.gradFloor) {
          if (bridge(y, t, q, tn, orient)) {
            accepted = true;
            break;
          }
          traj.arcLength += dist2(y, q);
          traj.points.push_back(q);
          traj.termination = Termination::NearCritical;
          return;
        }
        tn = tangent(grad, t);
        const Point2 chord = unit(sub2(q, y));
        const double cosTurn = std::cos(p_.maxTurn);
        if (dot2(tn, t) < cosTurn || dot2(chord, t) < cosTurn || dot2(chord, tn) < cosTurn) continue;
        // The nearest other branch runs the opposite way around {g > c}. A flip that survives
        // every halving is a passage through a saddle on the level itself.
        const bool flip = orient * dot2(rot90(grad), tn) < 0.0;
        if (flip && attempt < kMaxHalvings) continue;
        if (flip) orient = -orient;
        accepted = true;
        break;
      }
      if (!accepted) {
        throw Error(ErrorCode::StalledCorrection,
                    fmt::format("trace: step could not be completed near ({:.6f}, {:.6f}) after {} halvings",
                                y[0], y[1], kMaxHalvings));
      }
      traj.arcLength += dist2(y, q);
      traj.points.push_back(q);
      y = q;
      t = tn;
      if (p_.window && std::max(std::abs(y[0]), std::abs(y[1])) > *p_.window) {
        traj.termination = Termination::LeftWindow;
        return;
      }
    }
  }

  const RestrictedFunction& g_;
  double c_;
  const TraceParams& p_;
};

}  // namespace

Trajectory trace(const RestrictedFunction& g, double c, Point2 seed, const TraceParams& params) {
  return Continuation(g, c, params).run(seed);
}

void extendTrace(const RestrictedFunction& g, Trajectory& trajectory, const TraceParams& params) {
  if (trajectory.termination != Termination::BudgetExhausted || trajectory.points.size() < 2 ||
      trajectory.arcLength >= params.sMax) {
    return;
  }
  Continuation(g, trajectory.level, params).resume(trajectory);
}

namespace {

// Node lattice of the window; edge ids depend on the geometry only.
struct GridGeometry {
  int n = 0;
  double lo = 0.0;
  double h = 0.0;

  GridGeometry(double window, double gridStep) {
    if (!(window > 0.0) || !(gridStep > 0.0) || !(gridStep < window)) {
      throw Error(ErrorCode::Config, "grid: need 0 < gridStep < window");
    }
    n = static_cast<int>(std::ceil(2.0 * window / gridStep - 1e-9));
    lo = -window;
    h = 2.0 * window / n;
  }

  // Edge ids: horizontal (i,j)-(i+1,j) -> 2 * (j * n + i); vertical (i,j)-(i,j+1) -> 2 * (i * n + j) + 1.
  long horizontal(int i, int j) const { return 2L * (static_cast<long>(j) * n + i); }
  long vertical(int i, int j) const { return 2L * (static_cast<long>(i) * n + j) + 1; }
};

// Node values of g - c, shared by the seed finder and marching squares.
struct Grid : GridGeometry {
  std::vector<double> values;  // row-major in j

  Grid(const RestrictedFunction& g, double c, double window, double gridStep) : GridGeometry(window, gridStep) {
    values.resize(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) values[index(i, j)] = g.evaluate(node(i, j)) - c;
    }
  }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j * (n + 1) + i); }
  double value(int i, int j) const { return values[index(i, j)]; }
  Point2 node(int i, int j) const { return {lo + i * h, lo + j * h}; }
  bool positive(int i, int j) const { return value(i, j) >= 0.0; }
};

// Grid edges crossed by the segment p -> q.
void markCrossedEdges(const GridGeometry& grid, const Point2& p, const Point2& q, std::unordered_set<long>& out) {
  auto lineIndexRange = [&](double a, double b) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    return std::pair<int, int>{static_cast<int>(std::ceil((lo - grid.lo) / grid.h)),
                               static_cast<int>(std::floor((hi - grid.lo) / grid.h))};
  };
  const double tolAlong = 1e-3;
  // Horizontal grid lines y = lo + j h.
  auto [j0, j1] = lineIndexRange(p[1], q[1]);
  for (int j = std::max(j0, 0); j <= std::min(j1, grid.n); ++j) {
    const double yl = grid.lo + j * grid.h;
    if (q[1] == p[1]) continue;
    const double s = (yl - p[1]) / (q[1] - p[1]);
    const double x = p[0] + s * (q[0] - p[0]);
    const double u = (x - grid.lo) / grid.h;
    const int i = static_cast<int>(std::floor(u));
    for (int di = -1; di <= 1; ++di) {
      const int ii = i + di;
      if (ii < 0 || ii >= grid.n) continue;
      if (u >= ii - tolAlong && u <= ii + 1 + tolAlong) out.insert(grid.horizontal(ii, j));
    }
  }
  auto [i0, i1] = lineIndexRange(p[0], q[0]);
  for (int i = std::max(i0, 0); i <= std::min(i1, grid.n); ++i) {
    const double xl = grid.lo + i * grid.h;
    if (q[0] == p[0]) continue;
    const double s = (xl - p[0]) / (q[0] - p[0]);
    const double y = p[1] + s * (q[1] - p[1]);
    const double v = (y - grid.lo) / grid.h;
    const int j = static_cast<int>(std::floor(v));
    for (int dj = -1; dj <= 1; ++dj) {
      const int jj = j + dj;
      if (jj < 0 || jj >= grid.n) continue;
      if (v >= jj - tolAlong && v <= jj + 1 + tolAlong) out.insert(grid.vertical(i, jj));
    }
  }
}

Point2 bisectEdge(const RestrictedFunction& g, double c, Point2 a, Point2 b, double fa) {
  Point2 mid = a;
  for (int it = 0; it < 200; ++it) {
    mid = {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    const double fm = g.evaluate(mid) - c;
    if (std::abs(fm) < kLevelTol || dist2(a, b) < 1e-15) return mid;
    if ((fm >= 0.0) == (fa >= 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return mid;
}

// Clips the segment from inside point a to outside point b at the box boundary.
Point2 clipToBox(const Point2& a, const Point2& b, double window) {
  double s = 1.0;
  for (int k = 0; k < 2; ++k) {
    if (b[k] > window && b[k] != a[k]) s = std::min(s, (window - a[k]) / (b[k] - a[k]));
    if (b[k] < -window && b[k] != a[k]) s = std::min(s, (-window - a[k]) / (b[k] - a[k]));
  }
  s = std::clamp(s, 0.0, 1.0);
  return {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])};
}

void clipTail(std::vector<Point2>& pts, double window) {
  if (pts.size() < 2) return;
  const Point2& last = pts.back();
  if (std::max(std::abs(last[0]), std::abs(last[1])) > window) {
    pts.back() = clipToBox(pts[pts.size() - 2], last, window);
  }
}

}  // namespace

namespace {
double pointSegmentDistance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = sub2(b, a);
  const double len2 = dot2(ab, ab);
  double s = len2 > 0.0 ? dot2(sub2(p, a), ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return dist2(p, {a[0] + s * ab[0], a[1] + s * ab[1]});
}

double distanceToPolyline(const Point2& p, const std::vector<Point2>& line) {
  double best = line.empty() ? std::numeric_limits<double>::infinity() : dist2(p, line[0]);
  for (std::size_t k = 1; k < line.size(); ++k) best = std::min(best, pointSegmentDistance(p, line[k - 1], line[k]));
  return best;
}
}  // namespace

std::vector<WindowComponent> findWindowComponents(const RestrictedFunction& g, double c, double window,
                                                  double gridStep, const TraceParams& params) {
  const Grid grid(g, c, window, gridStep);

  struct Candidate {
    long edge;
    Point2 a, b;
    double fa;
  };
  std::vector<Candidate> candidates;
  for (int j = 0; j <= grid.n; ++j) {
    for (int i = 0; i <= grid.n; ++i) {
      if (i < grid.n && grid.positive(i, j) != grid.positive(i + 1, j)) {
        candidates.push_back({grid.horizontal(i, j), grid.node(i, j), grid.node(i + 1, j), grid.value(i, j)});
      }
      if (j < grid.n && grid.positive(i, j) != grid.positive(i, j + 1)) {
        candidates.push_back({grid.vertical(i, j), grid.node(i, j), grid.node(i, j + 1), grid.value(i, j)});
      }
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::EmptyLevel, fmt::format("level {} has no sign change on the sampled grid", c));
  }

  TraceParams windowed = params;
  windowed.window = window;
  // Closed curves inside the window are short; open pieces stop at the boundary.
  windowed.sMax = std::min(params.sMax, 64.0 * window * window / std::max(params.step, 1e-6) + 100.0);

  const double nodeTol = 0.25 * std::min(gridStep, params.step);
  std::vector<WindowComponent> out;
  std::vector<long> seedEdges;
  std::vector<std::unordered_set<long>> covered;
  for (const auto& cand : candidates) {
    const bool seen = std::any_of(covered.begin(), covered.end(), [&](const auto& s) { return s.count(cand.edge) > 0; });
    if (seen) continue;
    const Point2 seed = bisectEdge(g, c, cand.a, cand.b, cand.fa);
    // A curve through a grid node crosses none of the node's edges in between.
    const bool onEarlier = std::any_of(out.begin(), out.end(), [&](const WindowComponent& w) {
      return distanceToPolyline(seed, w.polyline) < nodeTol;
    });
    if (onEarlier) continue;

    WindowComponent comp;
    comp.seed = seed;
    windowed.direction = 1;
    Trajectory fwd = trace(g, c, seed, windowed);
    comp.closed = fwd.termination == Termination::Closed;
    comp.nearCritical = fwd.termination == Termination::NearCritical;
    if (comp.closed) {
      comp.polyline = std::move(fwd.points);
    } else {
      windowed.direction = -1;
      Trajectory bwd = trace(g, c, seed, windowed);
      comp.nearCritical = comp.nearCritical || bwd.termination == Termination::NearCritical;
      clipTail(bwd.points, window);
      clipTail(fwd.points, window);
      comp.polyline.assign(bwd.points.rbegin(), bwd.points.rend());
      comp.polyline.insert(comp.polyline.end(), fwd.points.begin() + 1, fwd.points.end());
    }

    std::unordered_set<long> edges{cand.edge};
    for (std::size_t k = 1; k < comp.polyline.size(); ++k) {
      markCrossedEdges(grid, comp.polyline[k - 1], comp.polyline[k], edges);
    }
    // Post-trace check: the new piece must not pass through an earlier seed's edge.
    bool duplicate = false;
    for (std::size_t k = 0; k < seedEdges.size(); ++k) {
      if (edges.count(seedEdges[k]) > 0) {
        covered[k].insert(edges.begin(), edges.end());
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    seedEdges.push_back(cand.edge);
    comp.edges.assign(edges.begin(), edges.end());
    std::sort(comp.edges.begin(), comp.edges.end());
    covered.push_back(std::move(edges));
    out.push_back(std::move(comp));
  }
  return out;
}

std::vector<long> crossedGridEdges(std::span<const Point2> polyline, double window, double gridStep) {
  const GridGeometry grid(window, gridStep);
  const double reach = window + grid.h;
  auto inside = [&](const Point2& p) { return std::max(std::abs(p[0]), std::abs(p[1])) <= reach; };
  std::unordered_set<long> edges;
  for (std::size_t k = 1; k < polyline.size(); ++k) {
    if (!inside(polyline[k - 1]) && !inside(polyline[k])) continue;
    markCrossedEdges(grid, polyline[k - 1], polyline[k], edges);
  }
  std::vector<long> out(edges.begin(), edges.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Point2> findSeeds(const RestrictedFunction& g, double c, double window, double gridStep,
                              const TraceParams& params) {
  std::vector<Point2> seeds;
  for (const auto& comp : findWindowComponents(g, c, window, gridStep, params)) seeds.push_back(comp.seed);
  return seeds;
}

std::vector<GridComponent> marchingSquares(const RestrictedFunction& g, double c, double window,
                                           double gridStep) {
  const Grid grid(g, c, window, gridStep);
  const int n = grid.n;

  std::unordered_map<long, Point2> crossing;
  std::unordered_map<long, std::vector<long>> links;
  auto crossingPoint = [&](long id, int i0, int j0, int i1, int j1) {
    if (crossing.count(id) == 0) {
      const double va = grid.value(i0, j0);
      const double vb = grid.value(i1, j1);
      const double s = va / (va - vb);
      const Point2 a = grid.node(i0, j0);
      const Point2 b = grid.node(i1, j1);
      crossing[id] = {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])};
    }
    return id;
  };
  auto link = [&](long a, long b) {
    links[a].push_back(b);
    links[b].push_back(a);
  };

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      // Corners counterclockwise from bottom-left; edge k joins corner k and k+1.
      const std::array<std::array<int, 2>, 4> corner{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
      const std::array<long, 4> edge{grid.horizontal(i, j), grid.vertical(i + 1, j), grid.horizontal(i, j + 1),
                                     grid.vertical(i, j)};
      std::array<bool, 4> pos{};
      for (int k = 0; k < 4; ++k) pos[k] = grid.positive(corner[k][0], corner[k][1]);
      std::vector<int> cut;
      for (int k = 0; k < 4; ++k) {
        if (pos[k] != pos[(k + 1) % 4]) {
          const auto& a = corner[k];
          const auto& b = corner[(k + 1) % 4];
          crossingPoint(edge[k], a[0], a[1], b[0], b[1]);
          cut.push_back(k);
        }
      }
      if (cut.size() == 2) {
        link(edge[cut[0]], edge[cut[1]]);
      } else if (cut.size() == 4) {
        const Point2 mid{grid.lo + (i + 0.5) * grid.h, grid.lo + (j + 0.5) * grid.h};
        const bool centerPositive = g.evaluate(mid) - c >= 0.0;
        // Cut off each corner whose sign differs from the center; corner k touches edges k-1 and k.
        for (int k = 0; k < 4; ++k) {
          if (pos[k] != centerPositive) link(edge[(k + 3) % 4], edge[k]);
        }
      }
    }
  }

  std::vector<long> ids;
  ids.reserve(links.size());
  for (const auto& [id, _] : links) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  std::unordered_set<long> visited;
  std::vector<GridComponent> out;
  auto walk = [&](long start) {
    GridComponent comp;
    long prev = -1;
    long cur = start;
    while (true) {
      visited.insert(cur);
      comp.polyline.push_back(crossing.at(cur));
      long next = -1;
      for (long nb : links.at(cur)) {
        if (nb != prev && visited.count(nb) == 0) {
          next = nb;
          break;
        }
      }
      if (next < 0) {
        const auto& nbs = links.at(cur);
        if (cur != start && std::find(nbs.begin(), nbs.end(), start) != nbs.end() && links.at(start).size() == 2) {
          comp.closed = true;
          comp.polyline.push_back(crossing.at(start));
        }
        break;
      }
      prev = cur;
      cur = next;
    }
    comp.touchesBoundary = !comp.closed;
    return comp;
  };
  for (long id : ids) {
    if (visited.count(id) == 0 && links.at(id).size() == 1) out.push_back(walk(id));
  }
  for (long id : ids) {
    if (visited.count(id) == 0) out.push_back(walk(id));
  }
  return out;
}

namespace {

double directedHausdorff(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = b.size() == 1 ? dist2(p, b[0]) : std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < b.size() && best > worst; ++k) best = std::min(best, pointSegmentDistance(p, b[k - 1], b[k]));
    worst = std::max(worst, best);
  }
  return worst;
}
}  // namespace

double hausdorffDistance(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "hausdorffDistance: empty polyline");
  return std::max(directedHausdorff(a, b), directedHausdorff(b, a));
}

}  // namespace qlev

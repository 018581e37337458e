#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qlev/tracer.hpp"
#include "../support.hpp"

using namespace qlev;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

RestrictedFunction separablePlane() { return restrict(testing::separable(4), testing::coordinatePlane(4)); }

// cos 2 pi y1 + 0.5 cos 2 pi y2: at c = 0 every component is an open curve near y1 = 1/4 + Z/2.
RestrictedFunction wavyPlane() {
  const TrigPolynomial f(4, {{testing::unit(4, 0), 1.0, 0.0}, {testing::unit(4, 1), 0.5, 0.0}});
  return restrict(f, testing::coordinatePlane(4));
}

// Perimeter of {cos 2 pi x + cos 2 pi y = c} around the origin, by bisection in polar form.
double ovalPerimeter(double c) {
  const int n = 20000;
  std::vector<Point2> pts;
  for (int k = 0; k < n; ++k) {
    const double th = kTwoPi * k / n;
    double lo = 0.0;
    double hi = 0.25;
    for (int it = 0; it < 80; ++it) {
      const double r = 0.5 * (lo + hi);
      const double v = std::cos(kTwoPi * r * std::cos(th)) + std::cos(kTwoPi * r * std::sin(th));
      (v > c ? lo : hi) = r;
    }
    pts.push_back({lo * std::cos(th), lo * std::sin(th)});
  }
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += dist2(pts[static_cast<std::size_t>(k)], pts[static_cast<std::size_t>((k + 1) % n)]);
  return s;
}

Point2 nearestInteger(const Point2& y) { return {std::round(y[0]), std::round(y[1])}; }

}  // namespace

TEST_CASE("small oval around a maximum closes with the right perimeter") {
  const RestrictedFunction g = separablePlane();
  const double c = 1.9;
  // Seed on the level along the positive y1 axis.
  double lo = 0.0;
  double hi = 0.25;
  for (int it = 0; it < 80; ++it) {
    const double r = 0.5 * (lo + hi);
    (g.evaluate({r, 0.0}) > c ? lo : hi) = r;
  }
  TraceParams p;
  p.step = 0.002;
  const Trajectory t = trace(g, c, {lo, 0.0}, p);
  CHECK((t.termination == Termination::Closed));
  CHECK(t.arcLength == doctest::Approx(ovalPerimeter(c)).epsilon(1e-4));
  for (const auto& y : t.points) CHECK(std::abs(g.evaluate(y) - c) < 1e-10);
  CHECK(dist2(t.points.back(), t.points.front()) < p.closureTol);
}

TEST_CASE("separatrix at c = 0 is a straight line of slope -1") {
  const RestrictedFunction g = separablePlane();
  TraceParams p;
  p.sMax = 50;
  const Trajectory t = trace(g, 0.0, {0.2, 0.3}, p);
  CHECK((t.termination == Termination::BudgetExhausted));
  CHECK(t.arcLength >= p.sMax);
  // Off-line distance is |g - c| / |grad g|, which grows next to the saddles.
  for (const auto& y : t.points) CHECK(std::abs(y[0] + y[1] - 0.5) < 1e-7);
  // Passes straight through the saddles at (0.5 + k, -k).
  CHECK(std::abs(t.points.back()[0] - t.points.front()[0]) > 30.0);
}

TEST_CASE("open curve runs until the budget") {
  const RestrictedFunction g = wavyPlane();
  TraceParams p;
  p.sMax = 50;
  const Trajectory t = trace(g, 0.0, {0.25, 0.25}, p);
  CHECK((t.termination == Termination::BudgetExhausted));
  CHECK(t.arcLength >= p.sMax);
  CHECK(t.arcLength < p.sMax + 2 * p.step);
  for (const auto& y : t.points) CHECK(std::abs(g.evaluate(y)) < 1e-10);
  CHECK(std::abs(t.points.back()[1] - t.points.front()[1]) > 30.0);
  CHECK(std::abs(t.points.back()[0] - t.points.front()[0]) < 0.2);
}

TEST_CASE("seed off the level is rejected") {
  const RestrictedFunction g = separablePlane();
  CHECK(testing::throwsCode([&] { trace(g, 1.0, {0.0, 0.0}); }, ErrorCode::SeedOffLevel));
}

TEST_CASE("trace stops near a critical point") {
  const RestrictedFunction g = separablePlane();
  const Point2 seed{0.5, 1e-8};
  const double c = g.evaluate(seed);
  const Trajectory t = trace(g, c, seed);
  CHECK((t.termination == Termination::NearCritical));
}

TEST_CASE("trace stops on leaving the window") {
  const RestrictedFunction g = wavyPlane();
  TraceParams p;
  p.window = 2.0;
  const Trajectory t = trace(g, 0.0, {0.25, 0.25}, p);
  CHECK((t.termination == Termination::LeftWindow));
  CHECK(std::max(std::abs(t.points.back()[0]), std::abs(t.points.back()[1])) > 2.0);
}

TEST_CASE("generic traces keep level fidelity, step bound and lift consistency") {
  std::mt19937_64 rng(21);
  for (int m : {3, 4}) {
    for (int trial = 0; trial < 3; ++trial) {
      const TrigPolynomial f = testing::randomTrig(m, rng);
      const PlaneSpec plane = testing::randomPlane(m, rng);
      const RestrictedFunction g = restrict(f, plane);
      const double c = 0.1 * trial;
      std::vector<Point2> seeds;
      try {
        seeds = findSeeds(g, c, 1.0, 0.05);
      } catch (const Error&) {
        continue;
      }
      TraceParams p;
      p.sMax = 30;
      for (std::size_t k = 0; k < std::min<std::size_t>(seeds.size(), 4); ++k) {
        const Trajectory t = trace(g, c, seeds[k], p);
        for (std::size_t j = 0; j < t.points.size(); ++j) {
          CHECK(std::abs(g.evaluate(t.points[j]) - c) < 1e-8);
          if (j > 0) CHECK(dist2(t.points[j], t.points[j - 1]) < 2 * p.step);
        }
        const RealVector x0 = t.lifted(0);
        const std::size_t last = t.points.size() - 1;
        const RealVector xl = t.lifted(last);
        const RealVector d = t.plane.toAmbient(sub2(t.points[last], t.points[0]));
        for (int i = 0; i < m; ++i) {
          CHECK(std::abs(xl[static_cast<std::size_t>(i)] - x0[static_cast<std::size_t>(i)] - d[static_cast<std::size_t>(i)]) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("reversed direction traverses the same curve") {
  std::mt19937_64 rng(22);
  const TrigPolynomial f = testing::randomTrig(4, rng);
  const RestrictedFunction g = restrict(f, testing::randomPlane(4, rng));
  const auto seeds = findSeeds(g, 0.0, 1.0, 0.05);
  REQUIRE(!seeds.empty());
  TraceParams fwd;
  fwd.sMax = 20;
  TraceParams bwd = fwd;
  bwd.direction = -1;
  const Trajectory a = trace(g, 0.0, seeds[0], fwd);
  const Trajectory b = trace(g, 0.0, seeds[0], bwd);
  if (a.termination == Termination::Closed) {
    CHECK((b.termination == Termination::Closed));
    CHECK(hausdorffDistance(a.points, b.points) < fwd.step);
  } else {
    // Open: the reverse trace of a's end point retraces a.
    const Trajectory back = trace(g, 0.0, a.points.back(), [&] {
      TraceParams q = bwd;
      q.sMax = a.arcLength;
      return q;
    }());
    CHECK(hausdorffDistance(a.points, back.points) < fwd.step);
  }
}

TEST_CASE("closed stays closed with a doubled budget") {
  const RestrictedFunction g = separablePlane();
  for (double c : {0.5, 1.0, 1.5}) {
    for (const auto& seed : findSeeds(g, c, 1.0, 0.05)) {
      TraceParams p;
      p.sMax = 20;
      const Trajectory a = trace(g, c, seed, p);
      p.sMax = 40;
      const Trajectory b = trace(g, c, seed, p);
      CHECK((a.termination == Termination::Closed));
      CHECK((b.termination == Termination::Closed));
      CHECK(a.points.size() == b.points.size());
    }
  }
}

TEST_CASE("extendTrace continues a budget-limited trace") {
  const RestrictedFunction g = wavyPlane();
  TraceParams p;
  p.sMax = 10;
  Trajectory t = trace(g, 0.0, {0.25, 0.25}, p);
  p.sMax = 20;
  extendTrace(g, t, p);
  CHECK((t.termination == Termination::BudgetExhausted));
  CHECK(t.arcLength >= 20.0);
  for (const auto& y : t.points) CHECK(std::abs(g.evaluate(y)) < 1e-10);
  const Trajectory whole = trace(g, 0.0, {0.25, 0.25}, p);
  CHECK(hausdorffDistance(t.points, whole.points) < 1e-6);
}

TEST_CASE("seeds of the separable function at c = 1") {
  const RestrictedFunction g = separablePlane();
  const auto seeds = findSeeds(g, 1.0, 1.0, 0.05);
  const auto grid = marchingSquares(g, 1.0, 1.0, 0.05);
  // The window cuts the eight outer ovals, so there are nine pieces.
  CHECK(seeds.size() == 9);
  CHECK(grid.size() == 9);
  for (const auto& s : seeds) {
    CHECK(std::abs(g.evaluate(s) - 1.0) < 1e-10);
    // The oval around a maximum lies between the diagonal radius sqrt(2)/6 and the axis radius 1/4.
    const double r = dist2(s, nearestInteger(s));
    CHECK(r > std::sqrt(2.0) / 6.0 - 1e-9);
    CHECK(r < 0.25 + 1e-9);
  }
  // One seed per oval.
  for (std::size_t a = 0; a < seeds.size(); ++a) {
    for (std::size_t b = a + 1; b < seeds.size(); ++b) CHECK(nearestInteger(seeds[a]) != nearestInteger(seeds[b]));
  }
}

TEST_CASE("level above the maximum is empty") {
  const RestrictedFunction g = separablePlane();
  CHECK(testing::throwsCode([&] { findSeeds(g, 3.0, 1.0, 0.05); }, ErrorCode::EmptyLevel));
}

TEST_CASE("marching squares on the separable function") {
  const RestrictedFunction g = separablePlane();
  // At c = 1.5 the ovals have axis radius 1/6 and all nine fit in the window.
  const auto ovals = marchingSquares(g, 1.5, 1.2, 0.01);
  CHECK(ovals.size() == 9);
  for (const auto& c : ovals) {
    CHECK(c.closed);
    CHECK_FALSE(c.touchesBoundary);
    for (const auto& y : c.polyline) CHECK(std::abs(g.evaluate(y) - 1.5) < 1e-3);
  }
}

TEST_CASE("separable level c = 0 in the window") {
  const RestrictedFunction g = separablePlane();
  // Traced: the eight diagonals y1 +- y2 in 1/2 + Z crossing [-1.2, 1.2]^2.
  const auto traced = findWindowComponents(g, 0.0, 1.2, 0.01);
  CHECK(traced.size() == 8);
  for (const auto& w : traced) {
    CHECK_FALSE(w.closed);
    const Point2 a = w.polyline.front();
    const Point2 b = w.polyline.back();
    CHECK(std::max(std::abs(a[0]), std::abs(a[1])) == doctest::Approx(1.2));
    CHECK(std::max(std::abs(b[0]), std::abs(b[1])) == doctest::Approx(1.2));
    for (const auto& y : w.polyline) {
      const Point2 ab = sub2(b, a);
      const Point2 r = sub2(y, a);
      CHECK(std::abs(r[0] * ab[1] - r[1] * ab[0]) / norm2(ab) < 1e-7);
    }
  }
  // The grid extraction lies on the same net; saddle cells may join it into corner loops.
  const auto grid = marchingSquares(g, 0.0, 1.2, 0.01);
  const auto open = std::count_if(grid.begin(), grid.end(), [](const auto& c) { return c.touchesBoundary; });
  CHECK(open == 8);
  for (const auto& c : grid) {
    for (const auto& y : c.polyline) {
      const double s = y[0] + y[1] - 0.5;
      const double d = y[0] - y[1] - 0.5;
      CHECK(std::min(std::abs(s - std::round(s)), std::abs(d - std::round(d))) < 1e-9);
    }
  }
}

TEST_CASE("marching squares and tracing find the same open curves") {
  const RestrictedFunction g = wavyPlane();
  const auto lines = marchingSquares(g, 0.0, 1.0, 0.01);
  CHECK(lines.size() == 4);
  for (const auto& c : lines) {
    CHECK_FALSE(c.closed);
    CHECK(c.touchesBoundary);
    for (const auto& y : c.polyline) CHECK(std::abs(g.evaluate(y)) < 1e-3);
  }
  const auto traced = findWindowComponents(g, 0.0, 1.0, 0.01);
  CHECK(traced.size() == 4);
  for (const auto& w : traced) {
    CHECK_FALSE(w.closed);
    double best = INFINITY;
    for (const auto& c : lines) best = std::min(best, hausdorffDistance(w.polyline, c.polyline));
    CHECK(best < 0.02);
  }
}

TEST_CASE("window components agree with marching squares on random fixtures") {
  std::mt19937_64 rng(23);
  const double h = 0.005;
  for (int m : {3, 4}) {
    for (int trial = 0; trial < 2; ++trial) {
      const TrigPolynomial f = testing::randomTrig(m, rng, 4);
      const RestrictedFunction g = restrict(f, testing::randomPlane(m, rng));
      const double c = 0.2;
      std::vector<WindowComponent> traced;
      try {
        traced = findWindowComponents(g, c, 0.8, h);
      } catch (const Error&) {
        continue;
      }
      const auto grid = marchingSquares(g, c, 0.8, h);
      CHECK(traced.size() == grid.size());
      const auto closedT = std::count_if(traced.begin(), traced.end(), [](const auto& w) { return w.closed; });
      const auto closedG = std::count_if(grid.begin(), grid.end(), [](const auto& w) { return w.closed; });
      CHECK(closedT == closedG);
      for (const auto& w : traced) {
        double best = INFINITY;
        for (const auto& gc : grid) best = std::min(best, hausdorffDistance(w.polyline, gc.polyline));
        CHECK(best < 2 * h);
      }
    }
  }
}

TEST_CASE("hausdorff distance of simple polylines") {
  const std::vector<Point2> a{{0, 0}, {1, 0}};
  const std::vector<Point2> b{{0, 0.1}, {1, 0.1}};
  CHECK(hausdorffDistance(a, b) == doctest::Approx(0.1).epsilon(1e-12));
  const std::vector<Point2> c{{0, 0}, {0.5, 0}};
  CHECK(hausdorffDistance(a, c) == doctest::Approx(0.5).epsilon(1e-12));
}

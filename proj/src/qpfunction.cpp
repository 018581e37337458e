#include "qlev/qpfunction.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "qlev/error.hpp"

namespace qlev {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TrigPolynomial::TrigPolynomial(int m, std::vector<Harmonic> harmonics) : m_(m) {
  if (m != 3 && m != 4) throw Error(ErrorCode::DimensionMismatch, fmt::format("TrigPolynomial: m = {} not in {{3, 4}}", m));
  std::map<IntegerVector, std::vector<Harmonic>> byFreq;
  for (auto& h : harmonics) {
    if (h.freq.dim() != m) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("TrigPolynomial: harmonic {} has dimension {}, expected {}", h.freq.str(), h.freq.dim(), m));
    }
    if (!std::isfinite(h.amplitude) || !std::isfinite(h.phase)) {
      throw Error(ErrorCode::Config, "TrigPolynomial: non-finite amplitude or phase");
    }
    if (!h.freq.isZero()) {
      // cos(-t + phi) = cos(t - phi)
      auto first = std::find_if(h.freq.entries().begin(), h.freq.entries().end(), [](auto e) { return e != 0; });
      if (*first < 0) {
        std::vector<std::int64_t> k = h.freq.entries();
        for (auto& e : k) e = -e;
        h.freq = IntegerVector(std::move(k));
        h.phase = -h.phase;
      }
    }
    byFreq[h.freq].push_back(h);
  }
  for (auto& [k, group] : byFreq) {
    if (group.size() == 1) {
      harmonics_.push_back(group.front());
      continue;
    }
    std::complex<double> sum{};
    for (const auto& h : group) sum += std::polar(h.amplitude, h.phase);
    harmonics_.push_back(Harmonic{k, std::abs(sum), std::arg(sum)});
  }
}

double TrigPolynomial::maxFrequencyNorm() const {
  double m = 0.0;
  for (const auto& h : harmonics_) m = std::max(m, h.freq.euclideanNorm());
  return m;
}

namespace {
double phaseAt(const Harmonic& h, std::span<const double> x) {
  double p = 0.0;
  for (int j = 0; j < h.freq.dim(); ++j) p += static_cast<double>(h.freq[j]) * x[static_cast<std::size_t>(j)];
  return kTwoPi * p + h.phase;
}
}  // namespace

double TrigPolynomial::evaluate(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& h : harmonics_) s += h.amplitude * std::cos(phaseAt(h, x));
  return s;
}

RealVector TrigPolynomial::gradient(std::span<const double> x) const {
  RealVector g(static_cast<std::size_t>(m_), 0.0);
  for (const auto& h : harmonics_) {
    const double c = -kTwoPi * h.amplitude * std::sin(phaseAt(h, x));
    for (int j = 0; j < m_; ++j) g[static_cast<std::size_t>(j)] += c * static_cast<double>(h.freq[j]);
  }
  return g;
}

std::vector<double> TrigPolynomial::hessian(std::span<const double> x) const {
  const auto m = static_cast<std::size_t>(m_);
  std::vector<double> hess(m * m, 0.0);
  for (const auto& h : harmonics_) {
    const double c = -kTwoPi * kTwoPi * h.amplitude * std::cos(phaseAt(h, x));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        hess[i * m + j] += c * static_cast<double>(h.freq[static_cast<int>(i)] * h.freq[static_cast<int>(j)]);
      }
    }
  }
  return hess;
}

TrigPolynomial TrigPolynomial::withAmplitudeFactors(std::span<const double> factors) const {
  std::vector<Harmonic> hs = harmonics_;
  for (std::size_t i = 0; i < hs.size() && i < factors.size(); ++i) hs[i].amplitude *= 1.0 + factors[i];
  return TrigPolynomial(m_, std::move(hs));
}

RestrictedFunction::RestrictedFunction(TrigPolynomial f, PlaneSpec plane)
    : f_(std::move(f)), plane_(std::move(plane)) {
  if (f_.dim() != plane_.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("restrict: function has m = {}, plane has m = {}", f_.dim(), plane_.dim()));
  }
  for (const auto& h : f_.harmonics()) {
    const RealVector k = h.freq.toReal();
    terms_.push_back(Term{h.amplitude, kTwoPi * dot(k, plane_.basePoint) + h.phase,
                          kTwoPi * dot(k, plane_.basis[0]), kTwoPi * dot(k, plane_.basis[1])});
  }
}

double RestrictedFunction::evaluate(const Point2& y) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.amplitude * std::cos(t.phase0 + t.w1 * y[0] + t.w2 * y[1]);
  return s;
}

Point2 RestrictedFunction::gradient(const Point2& y) const {
  Point2 g{};
  valueAndGradient(y, g);
  return g;
}

double RestrictedFunction::valueAndGradient(const Point2& y, Point2& grad) const {
  double v = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  for (const auto& t : terms_) {
    const double arg = t.phase0 + t.w1 * y[0] + t.w2 * y[1];
    const double c = std::cos(arg);
    const double s = std::sin(arg);
    v += t.amplitude * c;
    g1 -= t.amplitude * s * t.w1;
    g2 -= t.amplitude * s * t.w2;
  }
  grad = {g1, g2};
  return v;
}

Jet2 RestrictedFunction::jet(const Point2& y) const {
  Jet2 j;
  for (const auto& t : terms_) {
    const double arg = t.phase0 + t.w1 * y[0] + t.w2 * y[1];
    const double ac = t.amplitude * std::cos(arg);
    const double as = t.amplitude * std::sin(arg);
    j.value += ac;
    j.grad[0] -= as * t.w1;
    j.grad[1] -= as * t.w2;
    j.hess[0] -= ac * t.w1 * t.w1;
    j.hess[1] -= ac * t.w1 * t.w2;
    j.hess[2] -= ac * t.w2 * t.w2;
  }
  return j;
}

bool RestrictedFunction::isConstant() const {
  constexpr int kProbe = 17;
  for (int i = 0; i < kProbe; ++i) {
    for (int j = 0; j < kProbe; ++j) {
      const Point2 y{0.37 + i / double(kProbe - 1), -0.21 + j / double(kProbe - 1)};
      if (norm2(gradient(y)) >= 1e-13) return false;
    }
  }
  return true;
}

double RestrictedFunction::maxPlaneFrequency() const {
  double w = 0.0;
  for (const auto& t : terms_) w = std::max(w, std::hypot(t.w1, t.w2));
  return w / kTwoPi;
}

RestrictedFunction restrict(const TrigPolynomial& f, const PlaneSpec& plane) {
  return RestrictedFunction(f, plane);
}

namespace {

bool straddlesZero(double a, double b, double c, double d) {
  const double lo = std::min({a, b, c, d});
  const double hi = std::max({a, b, c, d});
  return lo <= 0.0 && hi >= 0.0;
}

CriticalPoint2D classifyCritical(const Point2& y, const Jet2& j) {
  CriticalPoint2D p;
  p.y = y;
  p.value = j.value;
  p.hessianDet = j.hess[0] * j.hess[2] - j.hess[1] * j.hess[1];
  const double tr = j.hess[0] + j.hess[2];
  if (p.hessianDet < 0.0) {
    p.morseIndex = 1;
  } else {
    p.morseIndex = tr < 0.0 ? 2 : 0;
  }
  return p;
}

}  // namespace

CriticalScan findCriticalPoints(const RestrictedFunction& g, double window, double gridStep) {
  if (!(window > 0.0) || !(gridStep > 0.0) || !(gridStep < window)) {
    throw Error(ErrorCode::Config, "findCriticalPoints: need 0 < gridStep < window");
  }
  CriticalScan scan;
  if (g.isConstant()) {
    scan.degenerate = true;
    return scan;
  }
  const int n = static_cast<int>(std::ceil(2.0 * window / gridStep - 1e-9));
  const double h = 2.0 * window / n;
  std::vector<Point2> grads(static_cast<std::size_t>((n + 1) * (n + 1)));
  auto at = [&](int i, int j) -> Point2& { return grads[static_cast<std::size_t>(j * (n + 1) + i)]; };
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) at(i, j) = g.gradient({-window + i * h, -window + j * h});
  }

  auto isDuplicate = [](const std::vector<CriticalPoint2D>& list, const Point2& y) {
    return std::any_of(list.begin(), list.end(), [&](const auto& p) { return dist2(p.y, y) < 1e-6; });
  };

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Point2 &a = at(i, j), &b = at(i + 1, j), &c = at(i, j + 1), &d = at(i + 1, j + 1);
      if (!straddlesZero(a[0], b[0], c[0], d[0]) || !straddlesZero(a[1], b[1], c[1], d[1])) continue;
      Point2 y{-window + (i + 0.5) * h, -window + (j + 0.5) * h};
      Jet2 jet = g.jet(y);
      for (int it = 0; it < 50 && norm2(jet.grad) >= 1e-12; ++it) {
        const double det = jet.hess[0] * jet.hess[2] - jet.hess[1] * jet.hess[1];
        if (det == 0.0) break;
        Point2 step{(jet.hess[2] * jet.grad[0] - jet.hess[1] * jet.grad[1]) / det,
                    (-jet.hess[1] * jet.grad[0] + jet.hess[0] * jet.grad[1]) / det};
        const double len = norm2(step);
        if (len > h) step = {step[0] * h / len, step[1] * h / len};
        y = {y[0] - step[0], y[1] - step[1]};
        jet = g.jet(y);
      }
      if (!(norm2(jet.grad) < 1e-9)) continue;
      if (std::abs(y[0]) > window + 1e-9 || std::abs(y[1]) > window + 1e-9) continue;
      CriticalPoint2D p = classifyCritical(y, jet);
      auto& list = std::abs(p.hessianDet) > 1e-10 ? scan.morse : scan.nonMorse;
      if (!isDuplicate(scan.morse, y) && !isDuplicate(scan.nonMorse, y)) list.push_back(p);
    }
  }
  auto byValue = [](const CriticalPoint2D& a, const CriticalPoint2D& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.y < b.y;
  };
  std::sort(scan.morse.begin(), scan.morse.end(), byValue);
  std::sort(scan.nonMorse.begin(), scan.nonMorse.end(), byValue);
  return scan;
}

}  // namespace qlev

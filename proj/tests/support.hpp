#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "qlev/classifier.hpp"
#include "qlev/error.hpp"
#include "qlev/lattice.hpp"
#include "qlev/qpfunction.hpp"

namespace qlev::testing {

/// True when f throws qlev::Error with the given code.
template <class F>
bool throwsCode(F&& f, ErrorCode code) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

inline IntegerVector unit(int m, int i) {
  std::vector<std::int64_t> k(static_cast<std::size_t>(m), 0);
  k[static_cast<std::size_t>(i)] = 1;
  return IntegerVector(k);
}

/// cos 2 pi x1 + cos 2 pi x2 in dimension m.
inline TrigPolynomial separable(int m = 4) {
  return TrigPolynomial(m, {{unit(m, 0), 1.0, 0.0}, {unit(m, 1), 1.0, 0.0}});
}

/// sum_i cos 2 pi x_i + 0.3 cos 2 pi (x1 + x2 - x3), m = 4.
inline TrigPolynomial generic4() {
  std::vector<Harmonic> hs;
  for (int i = 0; i < 4; ++i) hs.push_back({unit(4, i), 1.0, 0.0});
  hs.push_back({IntegerVector{1, 1, -1, 0}, 0.3, 0.0});
  return TrigPolynomial(4, hs);
}

/// The plane x4 = 0.1, x1 - x2 = 0.
inline PlaneSpec genericBasePlane() {
  return buildPlane({LinearForm::fromInteger({0, 0, 0, 1}), LinearForm::fromInteger({1, -1, 0, 0})}, {0.1, 0.0});
}

/// span(e1, e2) through the origin.
inline PlaneSpec coordinatePlane(int m = 4) {
  std::vector<LinearForm> forms;
  for (int i = 2; i < m; ++i) forms.push_back(LinearForm::fromInteger(unit(m, i)));
  return buildPlane(forms, RealVector(static_cast<std::size_t>(m - 2), 0.0));
}

/// Level-set settings used for the generic fixture.
inline LevelSetConfig genericLevelSet() {
  LevelSetConfig cfg;
  cfg.window = 0.6;
  cfg.gridStep = 0.02;
  cfg.trace.step = 0.05;
  cfg.trace.sMax = 64000;
  cfg.initialArc = 1000;
  cfg.directionTol = 0.02;
  return cfg;
}

inline TrigPolynomial randomTrig(int m, std::mt19937_64& rng, int terms = 5) {
  std::uniform_int_distribution<int> k(-2, 2);
  std::uniform_real_distribution<double> amp(0.3, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<Harmonic> hs;
  while (static_cast<int>(hs.size()) < terms) {
    std::vector<std::int64_t> f(static_cast<std::size_t>(m));
    for (auto& e : f) e = k(rng);
    IntegerVector v(f);
    if (v.isZero()) continue;
    hs.push_back({v, amp(rng), phase(rng)});
  }
  return TrigPolynomial(m, hs);
}

/// Plane cut by m - 2 random real forms with random offsets.
inline PlaneSpec randomPlane(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> b(0.0, 1.0);
  std::vector<LinearForm> forms;
  RealVector offsets;
  for (int i = 0; i < m - 2; ++i) {
    RealVector c(static_cast<std::size_t>(m));
    for (auto& x : c) x = n(rng);
    forms.push_back(LinearForm::fromReal(c));
    offsets.push_back(b(rng));
  }
  return buildPlane(forms, offsets);
}

inline RealVector randomPoint(int m, std::mt19937_64& rng, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  RealVector x(static_cast<std::size_t>(m));
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace qlev::testing

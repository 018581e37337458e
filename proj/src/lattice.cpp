#include "qlev/lattice.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "qlev/error.hpp"

namespace qlev {

bool IntegerVector::isZero() const {
  return std::all_of(entries_.begin(), entries_.end(), [](auto e) { return e == 0; });
}

double IntegerVector::euclideanNorm() const {
  double s = 0.0;
  for (auto e : entries_) s += static_cast<double>(e) * static_cast<double>(e);
  return std::sqrt(s);
}

std::int64_t IntegerVector::maxNorm() const {
  std::int64_t m = 0;
  for (auto e : entries_) m = std::max<std::int64_t>(m, e < 0 ? -e : e);
  return m;
}

RealVector IntegerVector::toReal() const {
  return RealVector(entries_.begin(), entries_.end());
}

std::string IntegerVector::str() const {
  return fmt::format("({})", fmt::join(entries_, ","));
}

IntegerVector primitiveNormalize(const IntegerVector& v) {
  if (v.isZero()) throw Error(ErrorCode::ZeroVector, "primitiveNormalize: zero vector");
  std::int64_t g = 0;
  for (auto e : v.entries()) g = std::gcd(g, e);
  auto first = std::find_if(v.entries().begin(), v.entries().end(), [](auto e) { return e != 0; });
  if (*first < 0) g = -g;
  std::vector<std::int64_t> out;
  out.reserve(v.entries().size());
  for (auto e : v.entries()) out.push_back(e / g);
  return IntegerVector(std::move(out));
}

int canonicalSign(std::span<const double> v, double eps) {
  for (double x : v) {
    if (std::abs(x) > eps) return x > 0 ? 1 : -1;
  }
  return 1;
}

LinearForm LinearForm::fromInteger(const IntegerVector& v) {
  if (v.isZero()) throw Error(ErrorCode::ZeroVector, "LinearForm: zero coefficients");
  return LinearForm{v.toReal(), v};
}

LinearForm LinearForm::fromReal(RealVector coefficients) {
  if (std::all_of(coefficients.begin(), coefficients.end(), [](double c) { return c == 0.0; })) {
    throw Error(ErrorCode::ZeroVector, "LinearForm: zero coefficients");
  }
  return LinearForm{std::move(coefficients), std::nullopt};
}

LinearForm LinearForm::perturbed(const LinearForm& other, double scale) const {
  if (other.dim() != dim()) throw Error(ErrorCode::DimensionMismatch, "LinearForm::perturbed");
  RealVector c = coefficients;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += scale * other.coefficients[i];
  return LinearForm{std::move(c), scale == 0.0 ? witness : std::nullopt};
}

RealVector PlaneSpec::lift(const Point2& y) const {
  RealVector x(basePoint.size());
  liftInto(y, x);
  return x;
}

void PlaneSpec::liftInto(const Point2& y, std::span<double> out) const {
  for (std::size_t i = 0; i < basePoint.size(); ++i) {
    out[i] = basePoint[i] + y[0] * basis[0][i] + y[1] * basis[1][i];
  }
}

Point2 PlaneSpec::project(std::span<const double> x) const {
  RealVector d(x.begin(), x.end());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= basePoint[i];
  return inPlane(d);
}

Point2 PlaneSpec::inPlane(std::span<const double> v) const {
  return {dot(v, basis[0]), dot(v, basis[1])};
}

RealVector PlaneSpec::toAmbient(const Point2& d) const {
  RealVector v(basePoint.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = d[0] * basis[0][i] + d[1] * basis[1][i];
  return v;
}

namespace {

constexpr double kIndependenceFloor = 1e-10;

// Kernel of the n x m form matrix via reduced row echelon form with partial pivoting.
// Free columns are taken in index order.
std::vector<RealVector> kernelByRowReduction(Eigen::MatrixXd a) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  std::vector<Eigen::Index> pivotCols;
  Eigen::Index r = 0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index c = 0; c < cols && r < rows; ++c) {
    Eigen::Index best = r;
    for (Eigen::Index i = r + 1; i < rows; ++i) {
      if (std::abs(a(i, c)) > std::abs(a(best, c))) best = i;
    }
    if (std::abs(a(best, c)) <= 1e-12 * scale) continue;
    a.row(r).swap(a.row(best));
    a.row(r) /= a(r, c);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (i != r && a(i, c) != 0.0) a.row(i) -= a(i, c) * a.row(r);
    }
    pivotCols.push_back(c);
    ++r;
  }
  std::vector<RealVector> kernel;
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (std::find(pivotCols.begin(), pivotCols.end(), c) != pivotCols.end()) continue;
    RealVector v(static_cast<std::size_t>(cols), 0.0);
    v[static_cast<std::size_t>(c)] = 1.0;
    for (std::size_t k = 0; k < pivotCols.size(); ++k) {
      v[static_cast<std::size_t>(pivotCols[k])] = -a(static_cast<Eigen::Index>(k), c);
    }
    kernel.push_back(std::move(v));
  }
  return kernel;
}

// Modified Gram-Schmidt, two passes.
void orthonormalize(std::vector<RealVector>& vs) {
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double p = dot(vs[i], vs[j]);
        for (std::size_t k = 0; k < vs[i].size(); ++k) vs[i][k] -= p * vs[j][k];
      }
    }
    const double n = norm(vs[i]);
    for (double& x : vs[i]) x /= n;
  }
}

}  // namespace

PlaneSpec buildPlane(std::vector<LinearForm> forms, RealVector offsets) {
  if (forms.empty()) throw Error(ErrorCode::DimensionMismatch, "buildPlane: no forms");
  const int m = forms.front().dim();
  if (m != 3 && m != 4) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("buildPlane: m = {} not in {{3, 4}}", m));
  }
  if (static_cast<int>(forms.size()) != m - 2) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("buildPlane: {} forms given, m - 2 = {} required", forms.size(), m - 2));
  }
  if (offsets.size() != forms.size()) {
    throw Error(ErrorCode::DimensionMismatch, "buildPlane: offsets count differs from form count");
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(forms.size()), m);
  for (std::size_t i = 0; i < forms.size(); ++i) {
    if (forms[i].dim() != m) throw Error(ErrorCode::DimensionMismatch, "buildPlane: form dimension");
    for (int j = 0; j < m; ++j) a(static_cast<Eigen::Index>(i), j) = forms[i].coefficients[static_cast<std::size_t>(j)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const double smallest = svd.singularValues().minCoeff();
  if (!(smallest > kIndependenceFloor)) {
    throw Error(ErrorCode::DegeneratePlane,
                fmt::format("buildPlane: forms dependent (smallest singular value {:.3e})", smallest));
  }

  // Minimum-norm point: x0 = A^T (A A^T)^{-1} b.
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(offsets.data(), static_cast<Eigen::Index>(offsets.size()));
  Eigen::MatrixXd gram = a * a.transpose();
  Eigen::VectorXd x0 = a.transpose() * gram.ldlt().solve(b);

  auto kernel = kernelByRowReduction(a);
  orthonormalize(kernel);

  PlaneSpec plane;
  plane.forms = std::move(forms);
  plane.offsets = std::move(offsets);
  plane.basePoint.assign(x0.data(), x0.data() + x0.size());
  plane.basis = {std::move(kernel[0]), std::move(kernel[1])};
  return plane;
}

PlaneSpec rotateBasis(const PlaneSpec& plane, double angle) {
  PlaneSpec out = plane;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t i = 0; i < plane.basePoint.size(); ++i) {
    out.basis[0][i] = c * plane.basis[0][i] + s * plane.basis[1][i];
    out.basis[1][i] = -s * plane.basis[0][i] + c * plane.basis[1][i];
  }
  return out;
}

std::vector<NormalCandidate> rationalizeCommonNormal(std::span<const RealVector> dirs,
                                                     int maxNorm, double tol) {
  if (dirs.empty()) throw Error(ErrorCode::EmptyInput, "rationalizeCommonNormal: no directions");
  if (maxNorm < 1) throw Error(ErrorCode::Config, "rationalizeCommonNormal: maxNorm < 1");
  const int m = static_cast<int>(dirs.front().size());
  for (const auto& d : dirs) {
    if (static_cast<int>(d.size()) != m) throw Error(ErrorCode::DimensionMismatch, "rationalizeCommonNormal");
  }

  std::vector<NormalCandidate> out;
  std::vector<std::int64_t> n(static_cast<std::size_t>(m), -maxNorm);
  // Odometer over the full box; the half-space filter drops -n duplicates.
  while (true) {
    auto first = std::find_if(n.begin(), n.end(), [](auto e) { return e != 0; });
    if (first != n.end() && *first > 0) {
      std::int64_t g = 0;
      for (auto e : n) g = std::gcd(g, e);
      if (g == 1) {
        double nn = 0.0;
        for (auto e : n) nn += static_cast<double>(e * e);
        nn = std::sqrt(nn);
        double worst = 0.0;
        for (const auto& d : dirs) {
          double p = 0.0;
          for (int i = 0; i < m; ++i) p += static_cast<double>(n[static_cast<std::size_t>(i)]) * d[static_cast<std::size_t>(i)];
          worst = std::max(worst, std::abs(p) / nn);
          if (worst >= tol) break;
        }
        if (worst < tol) out.push_back({IntegerVector(n), worst});
      }
    }
    int i = m - 1;
    while (i >= 0 && n[static_cast<std::size_t>(i)] == maxNorm) {
      n[static_cast<std::size_t>(i)] = -maxNorm;
      --i;
    }
    if (i < 0) break;
    ++n[static_cast<std::size_t>(i)];
  }
  std::stable_sort(out.begin(), out.end(), [](const NormalCandidate& a, const NormalCandidate& b) {
    if (a.residual != b.residual) return a.residual < b.residual;
    return a.normal.euclideanNorm() < b.normal.euclideanNorm();
  });
  return out;
}

}  // namespace qlev

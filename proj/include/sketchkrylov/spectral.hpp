#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "sketchkrylov/core.hpp"

namespace skrylov {

/// Complex eigenpairs M X = X diag(lambdas), with Xinv * X = I.
///
/// Columns of X have unit 2-norm and their first nonzero component is
/// real and positive. Conjugate eigenvalues of a real matrix carry
/// exactly conjugate eigenvectors.
struct EigenDecomposition {
  CMatrix X;
  CVector lambdas;
  CMatrix Xinv;
  /// Smallest pairwise eigenvalue distance fell below 1e-12 * ||M||.
  bool near_defective = false;
  double min_gap = std::numeric_limits<double>::infinity();

  Index size() const { return lambdas.size(); }
  /// 2-norm condition number of X (computed on demand).
  double eigenvector_condition() const {
    if (X.size() == 0) return 1.0;
    Eigen::JacobiSVD<CMatrix> svd(X);
    const auto& s = svd.singularValues();
    return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  }
};

struct EigOptions {
  /// Diagonal similarity balancing before the QR iteration. Off by
  /// default: it changes the reduced matrices being compared.
  bool balance = false;
  bool compute_inverse = true;
};

/// Real Schur form M = Z R Zᵀ.
struct SchurForm {
  Matrix Z;
  Matrix R;
};

namespace detail {

/// Parlett-Reinsch balancing with powers of two; returns D with
/// D^{-1} M D balanced.
inline Vector balancing_scales(Matrix& m) {
  const Index n = m.rows();
  Vector scale = Vector::Ones(n);
  constexpr double radix = 2.0;
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        scale(i) *= f;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
  return scale;
}

inline void normalize_eigenvectors(CMatrix& x, const CVector& lambdas) {
  const Index n = x.rows();
  for (Index k = 0; k < x.cols(); ++k) {
    auto col = x.col(k);
    const double nrm = col.norm();
    if (nrm > 0.0) col /= nrm;
    const double floor = 1e-300;
    for (Index i = 0; i < n; ++i) {
      const double a = std::abs(col(i));
      if (a > floor) {
        col *= std::conj(col(i)) / a;
        col(i) = cplx(a, 0.0);
        break;
      }
    }
  }
  // Exact conjugate symmetry for pairs coming from a real matrix.
  for (Index k = 0; k + 1 < x.cols(); ++k) {
    if (lambdas(k).imag() > 0.0 && lambdas(k + 1) == std::conj(lambdas(k))) {
      x.col(k + 1) = x.col(k).conjugate();
      ++k;
    }
  }
}

/// Eigendecomposition of a general real square matrix (Hessenberg
/// reduction, Francis double-shift QR, back substitution on the
/// quasi-triangular factor).
inline EigenDecomposition eigendecompose(const Matrix& m, const EigOptions& opts = {}) {
  detail::require(m.rows() == m.cols(), "eigendecomposition: matrix must be square");
  detail::require_finite(m, "eigendecomposition");
  const Index d = m.rows();
  EigenDecomposition out;
  if (d == 0) return out;

  Matrix work = m;
  Vector scale = Vector::Ones(d);
  if (opts.balance) scale = balancing_scales(work);

  Eigen::EigenSolver<Matrix> solver;
  solver.setMaxIterations(50 * d);
  solver.compute(work, true);
  if (solver.info() != Eigen::Success)
    throw numerical_error("eigendecomposition: QR iteration did not converge within " +
                          std::to_string(50 * d) + " sweeps");
  out.lambdas = solver.eigenvalues();
  out.X = solver.eigenvectors();
  if (opts.balance) out.X = scale.cast<cplx>().asDiagonal() * out.X;
  normalize_eigenvectors(out.X, out.lambdas);

  const double mnorm = m.norm();
  for (Index i = 0; i < d; ++i)
    for (Index j = i + 1; j < d; ++j)
      out.min_gap = std::min(out.min_gap, std::abs(out.lambdas(i) - out.lambdas(j)));
  out.near_defective = d > 1 && out.min_gap < 1e-12 * mnorm;

  if (opts.compute_inverse) out.Xinv = out.X.partialPivLu().inverse();
  return out;
}

}  // namespace detail

/// Eigendecomposition of an upper Hessenberg matrix.
inline EigenDecomposition hessenberg_eig(const Matrix& m, const EigOptions& opts = {}) {
  detail::require(m.rows() == m.cols(), "hessenberg_eig: matrix must be square");
  const double tol = 1e-14 * m.norm();
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = j + 2; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > tol)
        throw std::invalid_argument("hessenberg_eig: matrix is not upper Hessenberg");
  return detail::eigendecompose(m, opts);
}

inline SchurForm real_schur(const Matrix& m) {
  detail::require(m.rows() == m.cols(), "real_schur: matrix must be square");
  detail::require_finite(m, "real_schur");
  const Index d = m.rows();
  if (d == 0) return {};
  Eigen::RealSchur<Matrix> schur;
  schur.setMaxIterations(50 * d);
  schur.compute(m, true);
  if (schur.info() != Eigen::Success)
    throw numerical_error("real_schur: QR iteration did not converge within " +
                          std::to_string(50 * d) + " sweeps");
  return {schur.matrixU(), schur.matrixT()};
}

/// Eigenvalues read off the 1×1 and 2×2 diagonal blocks of a real Schur factor.
inline CVector schur_eigenvalues(const Matrix& r) {
  const Index d = r.rows();
  CVector out(d);
  for (Index i = 0; i < d;) {
    if (i + 1 < d && r(i + 1, i) != 0.0) {
      const double a = r(i, i), b = r(i, i + 1), c = r(i + 1, i), e = r(i + 1, i + 1);
      const double p = 0.5 * (a + e);
      const cplx disc = std::sqrt(cplx(0.25 * (a - e) * (a - e) + b * c, 0.0));
      out(i) = p + disc;
      out(i + 1) = p - disc;
      i += 2;
    } else {
      out(i) = r(i, i);
      ++i;
    }
  }
  return out;
}

}  // namespace skrylov

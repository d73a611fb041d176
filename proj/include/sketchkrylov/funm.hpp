#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/spectral.hpp"

namespace skrylov {

/// f(M) = X f(Λ) X⁻¹ for a real M and an f mapping conjugates to
/// conjugates. Refuses eigenvector bases with condition number above
/// 1/sqrt(machine epsilon).
inline Matrix funm_eig(const Matrix& m, const std::function<cplx(cplx)>& f) {
  detail::require(m.rows() == m.cols(), "funm_eig: matrix must be square");
  const Index d = m.rows();
  if (d == 0) return m;
  Eigen::HessenbergDecomposition<Matrix> hess(m);
  Matrix h = hess.matrixH();
  const Matrix p = hess.matrixQ();
  EigenDecomposition eig = hessenberg_eig(h);
  const double cond = eig.eigenvector_condition();
  const double limit = 1.0 / std::sqrt(std::numeric_limits<double>::epsilon());
  if (!(cond < limit))
    throw numerical_error("funm_eig: eigenvector condition number " + std::to_string(cond) +
                          " exceeds 1/sqrt(eps); use expm for the exponential");
  CVector fl(d);
  for (Index i = 0; i < d; ++i) fl(i) = f(eig.lambdas(i));
  const CMatrix fh = eig.X * fl.asDiagonal() * eig.Xinv;
  const CMatrix result = p.cast<cplx>() * fh * p.transpose().cast<cplx>();
  const double rnorm = result.norm();
  if (result.imag().norm() > 1e-8 * std::max(rnorm, 1e-300))
    throw numerical_error("funm_eig: result has a significant imaginary part");
  return result.real();
}

}  // namespace skrylov

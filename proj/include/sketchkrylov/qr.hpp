#pragma once

#include <vector>

#include "sketchkrylov/core.hpp"

namespace skrylov {

/// Thin QR factors B = Q T with Q column-orthonormal (s×m) and T upper
/// triangular (m×m) with nonnegative diagonal.
struct QRFactors {
  Matrix Q;
  Matrix T;
  /// Columns whose new diagonal entry of T vanished or fell below the
  /// near-dependence threshold.
  std::vector<Index> deficient_columns;

  Index rows() const { return Q.rows(); }
  Index cols() const { return T.cols(); }
  bool rank_deficient() const { return !deficient_columns.empty(); }
};

/// Householder thin QR. An exactly dependent column leaves a zero on the
/// diagonal of T and is reported in `deficient_columns`.
inline QRFactors thin_qr(const Matrix& b) {
  detail::require(b.rows() >= b.cols(), "thin_qr: need rows >= cols");
  const Index s = b.rows();
  const Index m = b.cols();
  Eigen::HouseholderQR<Matrix> hh(b);
  QRFactors out;
  out.Q = hh.householderQ() * Matrix::Identity(s, m);
  out.T = hh.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (Index j = 0; j < m; ++j) {
    if (out.T(j, j) < 0.0) {
      out.T.row(j) *= -1.0;
      out.Q.col(j) *= -1.0;
    }
    const double scale = b.col(j).norm();
    if (out.T(j, j) <= 1e-14 * scale || scale == 0.0) out.deficient_columns.push_back(j);
  }
  return out;
}

/// Appends one column by Gram-Schmidt against Q with one
/// reorthogonalization pass: T gains the column (t; tau).
/// A tau below `dependence_tol * ||b_new||` flags the column.
inline QRFactors qr_append_column(QRFactors qr, const Vector& b_new,
                                  double dependence_tol = 1e-14) {
  const Index m = qr.cols();
  if (m == 0 && qr.Q.rows() == 0) qr.Q.resize(b_new.size(), 0);
  detail::require(b_new.size() == qr.Q.rows(), "qr_append_column: length mismatch");
  detail::require(m < qr.Q.rows(), "qr_append_column: factorization already square");

  Vector t = Vector::Zero(m);
  Vector v = b_new;
  for (int pass = 0; pass < 2 && m > 0; ++pass) {
    const Vector c = qr.Q.transpose() * v;
    v.noalias() -= qr.Q * c;
    t += c;
  }
  const double tau = v.norm();
  const double scale = b_new.norm();

  qr.Q.conservativeResize(Eigen::NoChange, m + 1);
  qr.T.conservativeResize(m + 1, m + 1);
  qr.T.row(m).setZero();
  qr.T.col(m).head(m) = t;
  qr.T(m, m) = tau;
  if (tau > 0.0)
    qr.Q.col(m) = v / tau;
  else
    qr.Q.col(m).setZero();
  if (tau <= dependence_tol * scale || scale == 0.0) qr.deficient_columns.push_back(m);
  return qr;
}

}  // namespace skrylov

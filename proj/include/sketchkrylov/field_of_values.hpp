#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sketchkrylov/core.hpp"

namespace skrylov {

/// Boundary points of the field of values F(M): for θ_j = 2πj/n_angles
/// the Rayleigh quotient of the top eigenvector of the Hermitian part of
/// e^{iθ_j} M. Points are returned in angle order.
inline std::vector<cplx> fov_boundary(const CMatrix& m, Index n_angles) {
  detail::require(m.rows() == m.cols(), "fov_boundary: matrix must be square");
  detail::require(n_angles >= 8, "fov_boundary: need at least 8 angles");
  std::vector<cplx> points;
  points.reserve(static_cast<std::size_t>(n_angles));
  Eigen::SelfAdjointEigenSolver<CMatrix> solver;
  for (Index j = 0; j < n_angles; ++j) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_angles);
    const cplx rot = std::polar(1.0, theta);
    const CMatrix rotated = rot * m;
    const CMatrix herm = 0.5 * (rotated + rotated.adjoint());
    solver.compute(herm, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw numerical_error("fov_boundary: eigensolver failed");
    const CVector x = solver.eigenvectors().col(m.rows() - 1);
    points.push_back(x.dot(m * x) / x.squaredNorm());
  }
  return points;
}

inline std::vector<cplx> fov_boundary(const Matrix& m, Index n_angles) {
  return fov_boundary(CMatrix(m.cast<cplx>()), n_angles);
}

namespace detail {

inline double cross(cplx a, cplx b, cplx c) {
  const cplx u = b - a;
  const cplx v = c - a;
  return u.real() * v.imag() - u.imag() * v.real();
}

inline double segment_distance(cplx p, cplx a, cplx b) {
  const cplx ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  double t = ((p - a) * std::conj(ab)).real() / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

}  // namespace detail

/// Point-in-convex-polygon test for vertices in either orientation.
/// Points within `tol` of the boundary count as inside.
inline bool polygon_contains(const std::vector<cplx>& polygon, cplx p, double tol = 0.0) {
  const std::size_t n = polygon.size();
  if (n == 0) return false;
  if (n == 1) return std::abs(p - polygon[0]) <= tol;
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx a = polygon[i];
    const cplx b = polygon[(i + 1) % n];
    if (std::abs(b - a) == 0.0) continue;
    const double c = detail::cross(a, b, p);
    if (detail::segment_distance(p, a, b) <= tol) return true;
    if (c > 0.0) pos = true;
    if (c < 0.0) neg = true;
  }
  return !(pos && neg);
}

/// Distance from p to the convex polygon (0 inside).
inline double polygon_distance(const std::vector<cplx>& polygon, cplx p) {
  if (polygon_contains(polygon, p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < polygon.size(); ++i)
    best = std::min(best, detail::segment_distance(p, polygon[i], polygon[(i + 1) % polygon.size()]));
  return best;
}

/// Nearest point of the polygon boundary to p.
inline cplx polygon_nearest_boundary_point(const std::vector<cplx>& polygon, cplx p) {
  double best = std::numeric_limits<double>::infinity();
  cplx arg = polygon.empty() ? p : polygon.front();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const cplx a = polygon[i];
    const cplx b = polygon[(i + 1) % polygon.size()];
    const cplx ab = b - a;
    const double len2 = std::norm(ab);
    double t = len2 == 0.0 ? 0.0 : std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
    const cplx q = a + t * ab;
    if (std::abs(p - q) < best) {
      best = std::abs(p - q);
      arg = q;
    }
  }
  return arg;
}

}  // namespace skrylov

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/functions.hpp"
#include "sketchkrylov/funm.hpp"

namespace skrylov {

namespace detail {

inline double confluence_scale(cplx a, cplx b) {
  return std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool confluent(cplx a, cplx b) {
  return std::abs(a - b) <= 1e-8 * confluence_scale(a, b);
}

/// Nodes sorted lexicographically, then close nodes pulled together so
/// that confluent groups are contiguous. Deterministic in the multiset.
inline std::vector<cplx> grouped_nodes(std::span<const cplx> nodes) {
  std::vector<cplx> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  std::vector<cplx> out;
  out.reserve(sorted.size());
  std::vector<bool> used(sorted.size(), false);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (used[i]) continue;
    for (std::size_t j = i; j < sorted.size(); ++j) {
      if (!used[j] && confluent(sorted[i], sorted[j])) {
        used[j] = true;
        out.push_back(sorted[j]);
      }
    }
  }
  return out;
}

inline cplx newton_table(const AnalyticFunction& f, const std::vector<cplx>& z) {
  const std::size_t m = z.size();
  std::vector<cplx> c(m);
  for (std::size_t i = 0; i < m; ++i) c[i] = f(z[i]);
  double factorial = 1.0;
  for (std::size_t k = 1; k < m; ++k) {
    factorial *= static_cast<double>(k);
    for (std::size_t i = m - 1; i >= k; --i) {
      if (confluent(z[i], z[i - k])) {
        if (!f.has_derivative(static_cast<int>(k)))
          throw std::invalid_argument("divided_difference_table: confluent order " +
                                      std::to_string(k) + " needs a derivative of " + f.name +
                                      " that is not available");
        c[i] = f.derivative(z[i], static_cast<int>(k)) / factorial;
      } else {
        c[i] = (c[i] - c[i - 1]) / (z[i] - z[i - k]);
      }
    }
  }
  return c[m - 1];
}

}  // namespace detail

/// First-order divided difference f[t, λ]; f'(t) when the nodes are
/// within 1e-8 * max(1, |t|, |λ|) of each other.
inline cplx divided_difference(const AnalyticFunction& f, cplx t, cplx lambda) {
  if (detail::confluent(t, lambda)) {
    if (!f.has_derivative(1))
      throw std::invalid_argument("divided_difference: confluent nodes need f'");
    return f.derivative(t, 1);
  }
  return (f(t) - f(lambda)) / (t - lambda);
}

/// f[z_1, ..., z_m] via the Newton table; repeated nodes use derivatives.
inline cplx divided_difference_table(const AnalyticFunction& f, std::span<const cplx> nodes) {
  detail::require(!nodes.empty(), "divided_difference_table: no nodes");
  for (cplx z : nodes)
    detail::require(std::isfinite(z.real()) && std::isfinite(z.imag()),
                    "divided_difference_table: non-finite node");
  return detail::newton_table(f, detail::grouped_nodes(nodes));
}

struct CheckedDividedDifference {
  cplx value;
  cplx reversed_value;
  /// |value - reversed_value| / max(|value|, tiny)
  double relative_spread;
};

/// The table value plus the same table run over the reversed node order.
inline CheckedDividedDifference divided_difference_table_checked(const AnalyticFunction& f,
                                                                 std::span<const cplx> nodes) {
  const cplx value = divided_difference_table(f, nodes);
  std::vector<cplx> z = detail::grouped_nodes(nodes);
  std::reverse(z.begin(), z.end());
  const cplx rev = detail::newton_table(f, z);
  return {value, rev, std::abs(value - rev) / std::max(std::abs(value), 1e-300)};
}

namespace detail {

inline Matrix matrix_function(const AnalyticFunction& f, const Matrix& m) {
  if (f.matrix) return f.matrix(m);
  return funm_eig(m, f.value);
}

/// Reciprocal-condition estimate that also looks at the pivots: Eigen's
/// estimator can report 1 for an exactly zero trailing pivot.
inline double lu_rcond(const Eigen::PartialPivLU<CMatrix>& lu) {
  const auto piv = lu.matrixLU().diagonal().cwiseAbs();
  if (piv.size() == 0) return 1.0;
  const double ratio = piv.minCoeff() / std::max(piv.maxCoeff(), 1e-300);
  return std::min(lu.rcond(), ratio);
}

inline Eigen::PartialPivLU<CMatrix> resolvent_lu(const Matrix& m, cplx node, Index which) {
  CMatrix shifted = m.cast<cplx>();
  shifted.diagonal().array() -= node;
  Eigen::PartialPivLU<CMatrix> lu(shifted);
  // Only an exactly singular factorization is refused; near the spectrum of
  // a strongly non-normal M the resolvent is legitimately huge.
  const auto piv = lu.matrixLU().diagonal().cwiseAbs();
  if (!(piv.size() == 0 || (piv.minCoeff() > 0.0 && piv.allFinite())))
    throw numerical_error("matrix divided difference: M - lambda I is singular at node " +
                          std::to_string(which) + " (" + std::to_string(node.real()) + "," +
                          std::to_string(node.imag()) + ")");
  return lu;
}

inline void require_distinct(std::span<const cplx> nodes) {
  double scale = 0.0;
  for (cplx z : nodes) scale = std::max(scale, std::abs(z));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      if (std::abs(nodes[i] - nodes[j]) <= 1e-10 * scale)
        throw std::invalid_argument("matrix divided difference: nodes " + std::to_string(i) +
                                    " and " + std::to_string(j) + " collide");
}

}  // namespace detail

/// f[M, λ] = (f(M) - f(λ) I)(M - λ I)⁻¹ given f(M).
inline CMatrix matrix_first_divided_difference(const AnalyticFunction& f, const Matrix& m,
                                               const Matrix& fm, cplx node, Index which = 0) {
  CMatrix rhs = fm.cast<cplx>();
  rhs.diagonal().array() -= f(node);
  // The two factors commute; solve from the left.
  return detail::resolvent_lu(m, node, which).solve(rhs);
}

/// f[M, λ] w. For f = exp(c z) it is the top-right block of
/// exp(c [[M, w], [0, λ]]), which avoids the resolvent: near the spectrum
/// of a non-normal M, (M - λ I)⁻¹ amplifies the roundoff in f(M) far past
/// the size of the result. Otherwise uses the resolvent form above.
inline CVector first_divided_difference_action(const AnalyticFunction& f, const Matrix& m, const Matrix& fm,
                                               cplx node, const Vector& w, Index which = 0) {
  if (f.exp_scale) {
    const Index d = m.rows();
    CMatrix aug = CMatrix::Zero(d + 1, d + 1);
    aug.topLeftCorner(d, d) = m.cast<cplx>();
    aug.topRightCorner(d, 1) = w.cast<cplx>();
    aug(d, d) = node;
    aug *= *f.exp_scale;
    const CMatrix e = aug.exp();
    if (!e.allFinite()) throw numerical_error("divided difference: exponential of augmented matrix overflowed");
    return e.topRightCorner(d, 1);
  }
  return matrix_first_divided_difference(f, m, fm, node, which) * w.cast<cplx>();
}

/// f[M, λ_1, ..., λ_m] as the partial-fraction sum Σ f[M, λ_i] / ω'(λ_i),
/// ω(z) = Π (z - λ_j). Nodes must be pairwise distinct.
inline CMatrix matrix_divided_difference(const AnalyticFunction& f, const Matrix& m,
                                         std::span<const cplx> nodes) {
  detail::require(m.rows() == m.cols(), "matrix_divided_difference: matrix must be square");
  detail::require(!nodes.empty(), "matrix_divided_difference: no nodes");
  detail::require_distinct(nodes);
  const Matrix fm = detail::matrix_function(f, m);
  CMatrix sum = CMatrix::Zero(m.rows(), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    cplx omega_prime = 1.0;
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (j != i) omega_prime *= nodes[i] - nodes[j];
    sum += matrix_first_divided_difference(f, m, fm, nodes[i], static_cast<Index>(i)) / omega_prime;
  }
  return sum;
}

/// Same quantity through the Newton recurrence
/// f[M, λ_1..λ_j] = (f[M, λ_1..λ_{j-1}] - f[λ_1..λ_j] I)(M - λ_j I)⁻¹.
inline CMatrix matrix_divided_difference_recursive(const AnalyticFunction& f, const Matrix& m,
                                                   std::span<const cplx> nodes) {
  detail::require(m.rows() == m.cols(), "matrix_divided_difference: matrix must be square");
  detail::require(!nodes.empty(), "matrix_divided_difference: no nodes");
  detail::require_distinct(nodes);
  CMatrix current = detail::matrix_function(f, m).cast<cplx>();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const cplx scalar = divided_difference_table(f, nodes.subspan(0, j + 1));
    current.diagonal().array() -= scalar;
    current = detail::resolvent_lu(m, nodes[j], static_cast<Index>(j)).solve(current);
  }
  return current;
}

}  // namespace skrylov

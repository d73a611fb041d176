#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/divided_differences.hpp"
#include "sketchkrylov/field_of_values.hpp"
#include "sketchkrylov/functions.hpp"
#include "sketchkrylov/matfun.hpp"
#include "sketchkrylov/spectral.hpp"

namespace skrylov {

/// How f(M + w e_dᵀ) e_1 differs from f(M) e_1, through the eigenpairs of
/// the modified matrix.
///
/// With M + w e_dᵀ = X Λ X⁻¹, α_i = e_dᵀ X e_i and β_i = e_iᵀ X⁻¹ e_1:
///
///     g_w(M) w = Σ_i α_i β_i f[M, λ_i] w
///              = m_d Σ_i f[M, λ_i] w / ω'(λ_i)
///              = m_d f[M, λ_1, ..., λ_d] w,
///
/// where m_d is the product of the subdiagonal of M and ω(z) = Π (z - λ_j).
/// The last two forms require simple eigenvalues.
struct RankOneReport {
  Vector w;
  CVector lambdas;
  CVector alphas;
  CVector betas;
  /// Σ α_i β_i f[M, λ_i] w (real part; `gw_w_imag` keeps the discarded norm).
  Vector gw_w;
  double gw_w_imag = 0.0;
  /// f(M + w e_dᵀ) e_1 - f(M) e_1 evaluated directly.
  Vector direct_difference;
  double m_d = 0.0;
  /// Σ_i f[M, λ_i] w / ω'(λ_i), without the m_d factor.
  CVector partial_fraction_value;
  /// f[M, λ_1..λ_d] w by the Newton recurrence, without the m_d factor.
  CVector dd_value;
  bool simple_nodes = true;
  /// (1+√2) m_d / d! · max_D |f^(d)| · ||w||, D a disc enclosing F(M) and the λ_i.
  double bound = 0.0;
  /// The same with D replaced by a disc around F(M) of radius
  /// (its own radius + δ); an estimate, not a rigorous bound.
  double effective_bound = 0.0;
  std::vector<cplx> fov;
  std::vector<double> gammas;
  std::vector<Index> effective_set;
  double delta = 0.0;
  /// Σ over the effective set only.
  Vector gw_w_effective;
  std::vector<std::string> flags;
};

struct RankOneOptions {
  double beta_tol_rel = 1e-10;
  Index fov_angles = 128;
  bool compute_divided_difference_routes = true;
  bool compute_direct_difference = true;
  bool compute_bounds = true;
};

namespace detail {

inline double log_factorial(Index d) { return std::lgamma(static_cast<double>(d) + 1.0); }

}  // namespace detail

inline RankOneReport rank_one_report(const Matrix& m, const Vector& w, const AnalyticFunction& f,
                                     const RankOneOptions& opts = {}) {
  const Index d = m.rows();
  detail::require(m.cols() == d && w.size() == d && d >= 1, "rank_one_report: shape mismatch");
  RankOneReport rep;
  rep.w = w;

  Matrix mhat = m;
  mhat.col(d - 1) += w;
  const EigenDecomposition eig = detail::eigendecompose(mhat);
  rep.lambdas = eig.lambdas;
  rep.alphas = eig.X.row(d - 1).transpose();
  rep.betas = eig.Xinv.col(0);

  const Matrix fm = detail::matrix_function(f, m);
  const double scale = std::max(1.0, m.norm());
  std::vector<CVector> terms(static_cast<std::size_t>(d));
  CVector gw = CVector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    cplx node = eig.lambdas(i);
    if (!f.exp_scale) {
      // The resolvent route cannot take a node in the spectrum of M.
      CMatrix shifted = m.cast<cplx>();
      shifted.diagonal().array() -= node;
      Eigen::PartialPivLU<CMatrix> lu(shifted);
      if (!(detail::lu_rcond(lu) > 1e-14)) {
        node += 1e-8 * scale;
        rep.flags.push_back("node " + std::to_string(i) + " is (nearly) an eigenvalue of M; perturbed");
      }
    }
    terms[static_cast<std::size_t>(i)] = first_divided_difference_action(f, m, fm, node, w, i);
    gw += rep.alphas(i) * rep.betas(i) * terms[static_cast<std::size_t>(i)];
  }
  rep.gw_w = gw.real();
  rep.gw_w_imag = gw.imag().norm();

  if (opts.compute_direct_difference)
    rep.direct_difference = detail::matrix_function(f, mhat).col(0) - fm.col(0);

  rep.m_d = 1.0;
  for (Index j = 0; j + 1 < d; ++j) rep.m_d *= m(j + 1, j);

  if (opts.compute_divided_difference_routes) {
    double lam_scale = 0.0;
    for (Index i = 0; i < d; ++i) lam_scale = std::max(lam_scale, std::abs(eig.lambdas(i)));
    rep.simple_nodes = !(eig.min_gap <= 1e-10 * lam_scale) || d == 1;
    if (rep.simple_nodes) {
      CVector pf = CVector::Zero(d);
      for (Index i = 0; i < d; ++i) {
        cplx omega_prime = 1.0;
        for (Index j = 0; j < d; ++j)
          if (j != i) omega_prime *= eig.lambdas(i) - eig.lambdas(j);
        pf += terms[static_cast<std::size_t>(i)] / omega_prime;
      }
      rep.partial_fraction_value = pf;
      std::vector<cplx> nodes(eig.lambdas.data(), eig.lambdas.data() + d);
      try {
        rep.dd_value = matrix_divided_difference_recursive(f, m, nodes) * w.cast<cplx>();
      } catch (const std::exception& e) {
        rep.flags.push_back(std::string("recursive divided difference skipped: ") + e.what());
      }
    } else {
      rep.flags.push_back("confluent eigenvalues: divided-difference routes skipped");
    }
  }

  // Spectral geometry relative to F(M).
  rep.fov = fov_boundary(m, opts.fov_angles);
  const double mnorm = Eigen::BDCSVD<Matrix>(m).singularValues()(0);
  rep.gammas.resize(static_cast<std::size_t>(d));
  double beta_max = 0.0;
  for (Index i = 0; i < d; ++i) beta_max = std::max(beta_max, std::abs(rep.betas(i)));
  rep.gw_w_effective = Vector::Zero(d);
  CVector eff = CVector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    const double dist = polygon_distance(rep.fov, eig.lambdas(i));
    rep.gammas[static_cast<std::size_t>(i)] = mnorm > 0.0 ? dist / mnorm : 0.0;
    if (std::abs(rep.betas(i)) > opts.beta_tol_rel * beta_max) {
      rep.effective_set.push_back(i);
      rep.delta = std::max(rep.delta, dist);
      eff += rep.alphas(i) * rep.betas(i) * terms[static_cast<std::size_t>(i)];
    }
  }
  rep.gw_w_effective = eff.real();

  if (opts.compute_bounds) {
    cplx centre = 0.0;
    for (cplx z : rep.fov) centre += z;
    centre /= static_cast<double>(rep.fov.size());
    double r_fov = 0.0;
    for (cplx z : rep.fov) r_fov = std::max(r_fov, std::abs(z - centre));
    double r_all = r_fov;
    for (Index i = 0; i < d; ++i) r_all = std::max(r_all, std::abs(eig.lambdas(i) - centre));
    const double log_lead = std::log1p(std::numbers::sqrt2) + std::log(std::abs(rep.m_d)) -
                            detail::log_factorial(d) + std::log(w.norm());
    if (f.derivative_bound) {
      rep.bound = std::exp(log_lead) * f.derivative_bound(centre, r_all, static_cast<int>(d));
      rep.effective_bound = std::exp(log_lead) * f.derivative_bound(centre, r_fov + rep.delta, static_cast<int>(d));
    } else {
      rep.bound = std::numeric_limits<double>::quiet_NaN();
      rep.effective_bound = rep.bound;
      rep.flags.push_back("no derivative bound available for " + f.name);
    }
  }
  return rep;
}

/// The reduced matrix, modification and basis for one pairwise gap check.
struct GapContext {
  Matrix M;
  Vector w;
  /// Basis the difference lives in (𝒰_d or U_d), n×d.
  Matrix basis;
  double beta = 1.0;
};

struct GapReport {
  RankOneReport report;
  double lhs_norm = 0.0;          // ||a.value - b.value||
  double rhs_norm = 0.0;          // ||basis g_w(M) w|| ||b||
  double relative_mismatch = 0.0; // ||(a - b) - basis g_w(M) w ||b|||| / ||a - b||
};

/// Checks a.value - b.value = basis · g_w(M) w · ||b||.
inline GapReport approximation_gap(const Approximant& a, const Approximant& b, const GapContext& ctx,
                                   const AnalyticFunction& f, RankOneOptions opts = {}) {
  if (a.d != b.d) throw std::invalid_argument("approximation_gap: dimensions differ");
  if (a.fingerprint != b.fingerprint)
    throw std::invalid_argument("approximation_gap: approximants come from different (A, b)");
  detail::require(ctx.basis.cols() == a.d && ctx.M.rows() == a.d,
                  "approximation_gap: context does not match the approximant dimension");
  opts.compute_bounds = false;
  opts.compute_divided_difference_routes = false;
  GapReport out;
  out.report = rank_one_report(ctx.M, ctx.w, f, opts);
  const Vector diff = a.value - b.value;
  const Vector predicted = ctx.basis * out.report.gw_w * ctx.beta;
  out.lhs_norm = diff.norm();
  out.rhs_norm = predicted.norm();
  out.relative_mismatch = (diff - predicted).norm() / std::max(out.lhs_norm, 1e-300);
  return out;
}

/// |η_k| of one unit eigenvector of N + e_d wᵀ (N lower Hessenberg) and
/// the profile |φ_{k-1}(λ)|, φ_k(λ) = Π_{j<=k} (N_jj - λ)/N_{j,j+1},
/// scaled so the last entry is 1.
struct GrowthProfile {
  cplx lambda;
  Vector eta;
  Vector phi;
};

inline GrowthProfile eigvec_growth_profile(const Matrix& m_mod, const EigenDecomposition& eig, Index which) {
  const Index d = m_mod.rows();
  detail::require(which >= 0 && which < eig.lambdas.size(), "eigvec_growth_profile: eigenvalue index out of range");
  for (Index j = 0; j + 1 < d; ++j)
    if (m_mod(j, j + 1) == 0.0)
      throw std::invalid_argument("eigvec_growth_profile: zero superdiagonal entry at row " + std::to_string(j + 1));
  GrowthProfile out;
  out.lambda = eig.lambdas(which);
  out.eta = eig.X.col(which).cwiseAbs();
  // Accumulate in logs; the profile spans hundreds of orders of magnitude.
  Vector log_phi(d);
  log_phi(0) = 0.0;
  for (Index k = 1; k < d; ++k)
    log_phi(k) = log_phi(k - 1) + std::log(std::abs(m_mod(k - 1, k - 1) - out.lambda)) -
                 std::log(std::abs(m_mod(k - 1, k)));
  out.phi = (log_phi.array() - log_phi(d - 1)).exp();
  return out;
}

inline GrowthProfile eigvec_growth_profile(const Matrix& m_mod, Index which) {
  return eigvec_growth_profile(m_mod, detail::eigendecompose(m_mod), which);
}

}  // namespace skrylov

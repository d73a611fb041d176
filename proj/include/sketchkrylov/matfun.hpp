#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/expm.hpp"
#include "sketchkrylov/functions.hpp"
#include "sketchkrylov/funm.hpp"
#include "sketchkrylov/krylov.hpp"

namespace skrylov {

enum class Variant { fom, trfom, sfom_pinv, sfom_rankone_expm, sfom_rankone_schur, sfom_whitened };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::fom: return "fom";
    case Variant::trfom: return "trfom";
    case Variant::sfom_pinv: return "sfom_pinv";
    case Variant::sfom_rankone_expm: return "sfom_rankone_expm";
    case Variant::sfom_rankone_schur: return "sfom_rankone_schur";
    case Variant::sfom_whitened: return "sfom_whitened";
  }
  return "unknown";
}

inline Variant variant_from_string(const std::string& s) {
  for (Variant v : {Variant::fom, Variant::trfom, Variant::sfom_pinv, Variant::sfom_rankone_expm,
                    Variant::sfom_rankone_schur, Variant::sfom_whitened})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

inline bool is_sketched(Variant v) {
  return v == Variant::sfom_pinv || v == Variant::sfom_rankone_expm ||
         v == Variant::sfom_rankone_schur || v == Variant::sfom_whitened;
}

/// An approximation to f(A) b from a d-dimensional Krylov space:
/// value = basis * y.
struct Approximant {
  Variant variant = Variant::fom;
  Index d = 0;
  Vector y;
  Vector value;
  std::uint64_t fingerprint = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline Matrix apply_direct(const AnalyticFunction& f, const Matrix& m) {
  return f.matrix ? f.matrix(m) : funm_eig(m, f.value);
}

inline Matrix apply_schur(const AnalyticFunction& f, const Matrix& m) {
  if (f.exp_scale) return expm_via_schur(*f.exp_scale * m);
  const SchurForm schur = real_schur(m);
  return schur.Z * funm_eig(schur.R, f.value) * schur.Z.transpose();
}

inline Index usable_steps(const ArnoldiState& state, Index d) {
  const Index limit = state.steps();
  detail::require(d <= limit, "approximant: requested dimension " + std::to_string(d) +
                                  " exceeds the " + std::to_string(limit) + " steps taken");
  return d < 0 ? limit : d;
}

}  // namespace detail

/// U_d f(H_d) e_1 ||b|| (full FOM when the state is fully orthogonal,
/// truncated FOM otherwise).
inline Approximant galerkin_from_state(const ArnoldiState& state, const AnalyticFunction& f,
                                       Index d = -1) {
  d = detail::usable_steps(state, d);
  detail::require(d >= 1, "approximant: need at least one Arnoldi step");
  Approximant out;
  out.variant = state.full() ? Variant::fom : Variant::trfom;
  out.d = d;
  out.fingerprint = state.fingerprint();
  out.y = detail::apply_direct(f, state.H(d)).col(0) * state.beta();
  out.value = state.basis(d) * out.y;
  return out;
}

/// The four sketched formulations evaluated on the same sketch state.
inline Approximant sfom_from_state(const ArnoldiState& state, const SketchState& sk,
                                   const AnalyticFunction& f, Variant variant) {
  detail::require(is_sketched(variant), "sfom_from_state: not a sketched variant");
  const Index d = sk.steps();
  detail::require(d >= 1 && state.steps() == d, "sfom_from_state: states out of step");
  Approximant out;
  out.variant = variant;
  out.d = d;
  out.fingerprint = state.fingerprint();
  const Matrix td = sk.T(d);
  const auto tri = td.triangularView<Eigen::Upper>();
  const double diag_max = td.diagonal().cwiseAbs().maxCoeff();
  const double diag_min = td.diagonal().cwiseAbs().minCoeff();
  if (!(diag_min > 1e-14 * diag_max))
    out.warnings.push_back("T_d is numerically rank deficient; final accuracy may be limited");

  switch (variant) {
    case Variant::sfom_pinv: {
      // (S U_d)^+ = T_d⁻¹ Q_dᵀ applied to the explicitly sketched S A U_d and S b.
      Matrix m = sk.Q(d).transpose() * sk.SAU();
      m = tri.solve(m);
      Vector sb = sk.SU().col(0) * state.beta();
      Vector c = tri.solve(Vector(sk.Q(d).transpose() * sb));
      out.y = detail::apply_direct(f, m) * c;
      break;
    }
    case Variant::sfom_rankone_expm:
    case Variant::sfom_rankone_schur: {
      Matrix m = state.H(d);
      m.col(d - 1) += sk.r();
      const Matrix fm =
          variant == Variant::sfom_rankone_expm ? detail::apply_direct(f, m) : detail::apply_schur(f, m);
      out.y = fm.col(0) * state.beta();
      break;
    }
    case Variant::sfom_whitened: {
      Matrix m = sk.H_hat();
      m.col(d - 1) += sk.t_hat();
      const Vector yhat = detail::apply_direct(f, m).col(0) * sk.sb_norm(state.beta());
      out.y = tri.solve(yhat);
      break;
    }
    default: break;
  }
  out.value = state.basis(d) * out.y;
  if (!out.value.allFinite()) out.warnings.push_back("non-finite approximant");
  return out;
}

/// Full FOM approximation 𝒰_d f(𝓗_d) e_1 ||b||. Stops early at breakdown.
inline Approximant fom_approx(const SparseMatrix& a, const Vector& b, Index d,
                              const AnalyticFunction& f) {
  ArnoldiState state(a, b, 0, d);
  while (state.steps() < d && !state.breakdown()) arnoldi_step(state, a);
  return galerkin_from_state(state, f);
}

/// Truncated FOM approximation U_d f(H_d) e_1 ||b|| with window k.
inline Approximant trfom_approx(const SparseMatrix& a, const Vector& b, Index d, Index k,
                                const AnalyticFunction& f) {
  detail::require(k >= 1, "trfom_approx: truncation window must be >= 1");
  ArnoldiState state(a, b, k, d);
  while (state.steps() < d && !state.breakdown()) arnoldi_step(state, a);
  Approximant out = galerkin_from_state(state, f);
  out.variant = Variant::trfom;
  return out;
}

/// Sketched FOM with window k (0 = full orthogonalization).
inline Approximant sfom_approx(const SparseMatrix& a, const Vector& b, Index d, Index k,
                               const AnalyticFunction& f, const Embedding& s, Variant variant) {
  ArnoldiState state(a, b, k, d);
  SketchState sk(s, state);
  while (state.steps() < d && !state.breakdown()) {
    arnoldi_step(state, a);
    sketch_step(sk, state);
  }
  return sfom_from_state(state, sk, f, variant);
}

/// Orthogonal-basis form 𝒰_d f(𝓗_d + w e_dᵀ) e_1 ||b||.
inline Vector orthogonal_form(const OrthoComparison& oc, const Vector& w, const AnalyticFunction& f,
                              double beta) {
  const Index d = oc.curly_H.rows();
  Matrix m = oc.curly_H;
  m.col(d - 1) += w;
  return oc.curly_U.leftCols(d) * (detail::apply_direct(f, m).col(0) * beta);
}

}  // namespace skrylov

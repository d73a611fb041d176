#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/qr.hpp"
#include "sketchkrylov/sketch.hpp"
#include "sketchkrylov/sparse.hpp"

namespace skrylov {

/// Krylov basis U_{d+1} and Hessenberg H̲_d with A U_d = U_{d+1} H̲_d.
///
/// With `truncation == 0` every new vector is orthogonalized against the
/// whole basis (full Arnoldi); otherwise only against the last
/// `truncation` vectors, which yields a banded H and a non-orthogonal
/// U. Both modes run modified Gram-Schmidt twice over their window.
class ArnoldiState {
 public:
  ArnoldiState(const SparseMatrix& a, const Vector& b, Index truncation = 0, Index capacity = 32)
      : n_(a.rows()), truncation_(truncation) {
    detail::require(a.rows() == a.cols(), "ArnoldiState: matrix must be square");
    detail::require(b.size() == a.rows(), "ArnoldiState: right-hand side length mismatch");
    detail::require_finite(b, "ArnoldiState: b");
    detail::require(truncation >= 0, "ArnoldiState: truncation must be >= 0");
    beta_ = b.norm();
    detail::require(beta_ > 0.0, "ArnoldiState: b must be nonzero");
    norm_a_ = a.norm_estimate();
    fingerprint_ = detail::fnv1a(b.data(), static_cast<std::size_t>(b.size()) * sizeof(double),
                                 a.fingerprint());
    reserve(std::max<Index>(capacity, 1));
    u_.col(0) = b / beta_;
  }

  Index steps() const { return d_; }
  Index dimension() const { return n_; }
  Index truncation() const { return truncation_; }
  bool full() const { return truncation_ == 0; }
  double beta() const { return beta_; }
  double norm_estimate() const { return norm_a_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  /// Step index d at which h_{d+1,d} vanished, if any.
  std::optional<Index> breakdown() const { return breakdown_; }

  /// U_cols = first `cols` basis vectors.
  auto basis(Index cols) const { return u_.leftCols(cols); }
  /// u_j, zero-based.
  auto column(Index j) const { return u_.col(j); }
  /// H_d (d×d) for any d <= steps().
  Matrix H(Index d) const { return h_.topLeftCorner(d, d); }
  Matrix H() const { return H(d_); }
  /// H̲_d ((d+1)×d).
  Matrix H_underline(Index d) const { return h_.topLeftCorner(d + 1, d); }
  double h_next(Index d) const { return h_(d, d - 1); }
  double h_next() const { return h_next(d_); }
  /// A u_d from the most recent step (before orthogonalization).
  const Vector& last_product() const { return last_product_; }

  void step(const SparseMatrix& a) {
    if (breakdown_) throw std::logic_error("arnoldi_step: basis already broke down at step " +
                                           std::to_string(*breakdown_));
    detail::require(a.rows() == n_ && a.cols() == n_, "arnoldi_step: matrix size mismatch");
    if (d_ + 2 > u_.cols()) reserve(2 * u_.cols());
    const Index j = d_;
    Vector w = spmv(a, Vector(u_.col(j)));
    last_product_ = w;
    const Index lo = full() ? 0 : std::max<Index>(0, j - truncation_ + 1);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = lo; i <= j; ++i) {
        const double c = u_.col(i).dot(w);
        w.noalias() -= c * u_.col(i);
        h_(i, j) += c;
      }
    }
    const double hn = w.norm();
    ++d_;
    if (hn <= 1e-14 * norm_a_ || hn == 0.0) {
      breakdown_ = d_;
      h_(j + 1, j) = 0.0;
      u_.col(j + 1).setZero();
      return;
    }
    h_(j + 1, j) = hn;
    u_.col(j + 1) = w / hn;
  }

 private:
  void reserve(Index cols) {
    Matrix u = Matrix::Zero(n_, cols + 1);
    Matrix h = Matrix::Zero(cols + 1, cols);
    u.topLeftCorner(u_.rows(), u_.cols()) = u_;
    h.topLeftCorner(h_.rows(), h_.cols()) = h_;
    u_ = std::move(u);
    h_ = std::move(h);
  }

  Index n_ = 0;
  Index truncation_ = 0;
  Index d_ = 0;
  double beta_ = 0.0;
  double norm_a_ = 0.0;
  std::uint64_t fingerprint_ = 0;
  std::optional<Index> breakdown_;
  Matrix u_;
  Matrix h_;
  Vector last_product_;
};

inline void arnoldi_step(ArnoldiState& state, const SparseMatrix& a) { state.step(a); }

/// Sketched quantities kept in lockstep with an ArnoldiState: S U_{d+1},
/// S A U_d, the thin QR S U_{d+1} = Q_{d+1} T_{d+1}, and the derived
/// r = h_{d+1,d} T_d⁻¹ t, Ĥ_d = T_d H_d T_d⁻¹, t̂ = (h_{d+1,d}/τ_d) t.
class SketchState {
 public:
  SketchState(Embedding s, const ArnoldiState& state) : s_(std::move(s)) {
    detail::require(state.steps() == 0, "SketchState: must start from an unexpanded basis");
    detail::require(s_.cols() == state.dimension(), "SketchState: embedding dimension mismatch");
    su_ = s_.apply(Vector(state.column(0)));
    qr_ = qr_append_column(std::move(qr_), Vector(su_.col(0)));
    sau_.resize(s_.rows(), 0);
  }

  const Embedding& embedding() const { return s_; }
  Index steps() const { return d_; }
  const Matrix& SU() const { return su_; }
  const Matrix& SAU() const { return sau_; }
  const QRFactors& qr() const { return qr_; }
  Matrix T(Index d) const { return qr_.T.topLeftCorner(d, d); }
  Matrix T() const { return T(d_); }
  auto Q(Index d) const { return qr_.Q.leftCols(d); }
  /// Last column of T_{d+1} above the diagonal.
  const Vector& t() const { return t_; }
  double tau_next() const { return tau_next_; }
  /// τ_d, the last diagonal entry of T_d.
  double tau() const { return qr_.T(d_ - 1, d_ - 1); }
  const Vector& r() const { return r_; }
  const Matrix& H_hat() const { return h_hat_; }
  const Vector& t_hat() const { return t_hat_; }
  /// ||S b|| = ||b|| · τ_1.
  double sb_norm(double beta) const { return beta * qr_.T(0, 0); }
  /// Steps at which τ_{d+1} fell to 1e-14 or below.
  const std::vector<Index>& dependence_steps() const { return dependence_steps_; }

  void step(const ArnoldiState& state) {
    detail::require(state.steps() == d_ + 1, "sketch_step: Arnoldi state must be exactly one step ahead");
    const Index d = d_ + 1;
    sau_.conservativeResize(Eigen::NoChange, d);
    sau_.col(d - 1) = s_.apply(state.last_product());
    const double h = state.h_next(d);
    const bool broke = state.breakdown().has_value();
    if (!broke) {
      su_.conservativeResize(Eigen::NoChange, d + 1);
      su_.col(d) = s_.apply(Vector(state.column(d)));
      const double su_norm = su_.col(d).norm();
      qr_ = qr_append_column(std::move(qr_), Vector(su_.col(d)), 0.0);
      t_ = qr_.T.col(d).head(d);
      tau_next_ = qr_.T(d, d);
      if (tau_next_ <= 1e-14 * std::max(1.0, su_norm)) dependence_steps_.push_back(d);
    } else {
      t_ = Vector::Zero(d);
      tau_next_ = 0.0;
    }
    d_ = d;

    const Matrix td = T(d);
    const auto tri = td.triangularView<Eigen::Upper>();
    r_ = h * tri.solve(t_);
    Matrix y = tri * state.H(d);
    tri.template solveInPlace<Eigen::OnTheRight>(y);
    h_hat_ = std::move(y);
    t_hat_ = (h / td(d - 1, d - 1)) * t_;
  }

 private:
  Embedding s_;
  Index d_ = 0;
  Matrix su_;
  Matrix sau_;
  QRFactors qr_;
  Vector t_;
  double tau_next_ = 0.0;
  Vector r_;
  Matrix h_hat_;
  Vector t_hat_;
  std::vector<Index> dependence_steps_;
};

inline void sketch_step(SketchState& sk, const ArnoldiState& state) { sk.step(state); }

/// max_j ||A u_j - U_{j+1} h_j|| / ||A||, computed with fresh products.
inline double arnoldi_relation_residual(const ArnoldiState& state, const SparseMatrix& a) {
  const Index d = state.steps();
  const Matrix hu = state.H_underline(d);
  double worst = 0.0;
  for (Index j = 0; j < d; ++j) {
    const Vector au = spmv(a, Vector(state.column(j)));
    const Vector rel = au - state.basis(j + 2) * hu.col(j).head(j + 2);
    worst = std::max(worst, rel.norm());
  }
  return worst / std::max(state.norm_estimate(), 1e-300);
}

/// ||S A U_d - S U_d (H_d + r e_dᵀ) - τ_{d+1} h_{d+1,d} q e_dᵀ|| / ||S A U_d||.
inline double sketched_arnoldi_residual(const ArnoldiState& state, const SketchState& sk) {
  const Index d = sk.steps();
  detail::require(d >= 1 && state.steps() >= d, "sketched_arnoldi_residual: no steps taken");
  Matrix rhs = sk.SU().leftCols(d) * state.H(d);
  rhs.col(d - 1) += sk.SU().leftCols(d) * sk.r();
  if (!state.breakdown()) rhs.col(d - 1) += sk.tau_next() * state.h_next(d) * sk.qr().Q.col(d);
  return (sk.SAU() - rhs).norm() / std::max(sk.SAU().norm(), 1e-300);
}

/// Residual of the whitened relation
/// S A U_d T_d⁻¹ = Q_d (Ĥ_d + t̂ e_dᵀ) + (τ_{d+1}/τ_d) h_{d+1,d} q e_dᵀ,
/// relative to ||S A U_d T_d⁻¹||.
inline double whitened_arnoldi_residual(const ArnoldiState& state, const SketchState& sk) {
  const Index d = sk.steps();
  detail::require(d >= 1, "whitened_arnoldi_residual: no steps taken");
  Matrix lhs = sk.SAU();
  const Matrix td = sk.T(d);
  td.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(lhs);
  Matrix m = sk.H_hat();
  m.col(d - 1) += sk.t_hat();
  Matrix rhs = sk.Q(d) * m;
  if (!state.breakdown())
    rhs.col(d - 1) += (sk.tau_next() / sk.tau()) * state.h_next(d) * sk.qr().Q.col(d);
  return (lhs - rhs).norm() / std::max(lhs.norm(), 1e-300);
}

struct WhitenedConditioning {
  double kappa = 0.0;        // κ₂(U_d T_d⁻¹)
  double epsilon_hat = 0.0;  // measured distortion on range(U_d)
  double bound = 0.0;        // sqrt((1+ε̂)/(1-ε̂)), +inf when ε̂ >= 1
};

inline double conditioning_bound(double epsilon) {
  return epsilon < 1.0 ? std::sqrt((1.0 + epsilon) / (1.0 - epsilon))
                       : std::numeric_limits<double>::infinity();
}

inline double condition_number(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  const Vector s = Eigen::BDCSVD<Matrix>(m).singularValues();
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

/// Orthonormal basis of range(U) via Householder QR.
inline Matrix orthonormalize(const Matrix& u) {
  Eigen::HouseholderQR<Matrix> qr(u);
  return qr.householderQ() * Matrix::Identity(u.rows(), u.cols());
}

/// κ₂(U_d T_d⁻¹) with the bound from an a-posteriori ε̂. Dense SVD of an
/// n×d matrix, so d is capped.
inline WhitenedConditioning whitened_basis_condition(const ArnoldiState& state, const SketchState& sk,
                                                     Index max_columns = 2000) {
  const Index d = sk.steps();
  detail::require(d >= 1, "whitened_basis_condition: no steps taken");
  detail::require(d <= max_columns, "whitened_basis_condition: basis exceeds the dense cap");
  Matrix w = state.basis(d);
  sk.T(d).triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(w);
  WhitenedConditioning out;
  out.kappa = condition_number(w);
  out.epsilon_hat = estimate_epsilon(sk.embedding(), orthonormalize(state.basis(d)));
  out.bound = conditioning_bound(out.epsilon_hat);
  return out;
}

/// The truncated basis expressed in an orthonormal basis of the same
/// nested spaces: U_{d+1} = 𝒰_{d+1} 𝒯_{d+1}. Analysis only.
struct OrthoComparison {
  Matrix curly_U;   // 𝒰_{d+1} (n×(d+1))
  Matrix curly_T;   // 𝒯_{d+1}
  Matrix curly_H;   // 𝓗_d = top d×d block of 𝒯_{d+1} H̲_d 𝒯_d⁻¹
  double curly_h_next = 0.0;
  Vector t_curly;   // 𝓉, last column of 𝒯_{d+1} above the diagonal
  double tau_hat_d = 0.0;
  double tau_hat_next = 0.0;
  Vector r_hat;     // (𝒯_d T_d⁻¹ t - 𝓉) h_{d+1,d} / τ̂_d
  Vector v_trunc;   // -(h_{d+1,d} / τ̂_d) 𝓉
  double epsilon_hat = 0.0;  // measured on range(U_{d+1})
  double r_hat_bound = 0.0;  // h_{d+1,d} |τ̂_{d+1}/τ̂_d| sqrt((1+ε̂)/(1-ε̂))
};

inline OrthoComparison ortho_comparison(const ArnoldiState& state, const SketchState& sk) {
  const Index d = sk.steps();
  detail::require(d >= 1 && state.steps() == d, "ortho_comparison: states out of step");
  const bool broke = state.breakdown().has_value();
  const Index cols = broke ? d : d + 1;
  const QRFactors qr = thin_qr(Matrix(state.basis(cols)));
  OrthoComparison out;
  out.curly_U = qr.Q;
  out.curly_T = qr.T;
  for (Index j = 0; j < cols; ++j)
    if (!(qr.T(j, j) > 1e-14))
      throw numerical_error("ortho_comparison: truncated basis has degenerated at column " +
                            std::to_string(j + 1));
  const double h = state.h_next(d);
  out.tau_hat_d = qr.T(d - 1, d - 1);
  out.tau_hat_next = broke ? 0.0 : qr.T(d, d);
  out.t_curly = broke ? Vector::Zero(d) : Vector(qr.T.col(d).head(d));

  const Matrix ctd = qr.T.topLeftCorner(d, d);
  Matrix ch = ctd.triangularView<Eigen::Upper>() * state.H(d);
  ch.col(d - 1) += out.t_curly * h;
  ctd.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(ch);
  out.curly_H = std::move(ch);
  out.curly_h_next = broke ? 0.0 : out.tau_hat_next * h / out.tau_hat_d;

  const Vector tinv_t = sk.T(d).triangularView<Eigen::Upper>().solve(sk.t());
  out.r_hat = (ctd.triangularView<Eigen::Upper>() * tinv_t - out.t_curly) * (h / out.tau_hat_d);
  out.v_trunc = -(h / out.tau_hat_d) * out.t_curly;

  out.epsilon_hat = estimate_epsilon(sk.embedding(), out.curly_U);
  out.r_hat_bound = h * std::abs(out.tau_hat_next / out.tau_hat_d) * conditioning_bound(out.epsilon_hat);
  return out;
}

}  // namespace skrylov

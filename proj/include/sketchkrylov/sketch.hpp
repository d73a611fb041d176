#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "sketchkrylov/core.hpp"

namespace skrylov {

enum class EmbeddingKind { gaussian, sparse_sign, srdct };

inline std::string to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::gaussian: return "gaussian";
    case EmbeddingKind::sparse_sign: return "sparse-sign";
    case EmbeddingKind::srdct: return "srdct";
  }
  return "unknown";
}

inline EmbeddingKind embedding_kind_from_string(const std::string& s) {
  if (s == "gaussian") return EmbeddingKind::gaussian;
  if (s == "sparse-sign" || s == "sparse_sign") return EmbeddingKind::sparse_sign;
  if (s == "srdct") return EmbeddingKind::srdct;
  throw std::invalid_argument("unknown sketch kind '" + s + "'");
}

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array
// interface is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace detail

/// Oblivious subspace embedding S ∈ R^{s×n}, a pure function of
/// (kind, s, n, seed).
///
///  - gaussian:    dense i.i.d. N(0, 1/s) entries.
///  - sparse_sign: zeta = min(8, s) nonzeros ±1/sqrt(zeta) per column.
///  - srdct:       sqrt(n/s) · (row subsample) · DCT-II · (random signs).
class Embedding {
 public:
  Embedding(EmbeddingKind kind, Index s, Index n, std::uint64_t seed)
      : kind_(kind), s_(s), n_(n), seed_(seed) {
    detail::require(s >= 1, "make_embedding: sketch dimension must be >= 1");
    detail::require(s <= n, "make_embedding: sketch dimension " + std::to_string(s) +
                                " exceeds ambient dimension " + std::to_string(n));
    std::mt19937_64 rng(seed);
    switch (kind) {
      case EmbeddingKind::gaussian: {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(s)));
        gaussian_.resize(s, n);
        for (Index j = 0; j < n; ++j)
          for (Index i = 0; i < s; ++i) gaussian_(i, j) = normal(rng);
        break;
      }
      case EmbeddingKind::sparse_sign: {
        zeta_ = std::min<Index>(8, s);
        const double mag = 1.0 / std::sqrt(static_cast<double>(zeta_));
        rows_.resize(static_cast<std::size_t>(n * zeta_));
        signs_.resize(rows_.size());
        std::uniform_int_distribution<Index> pick(0, s - 1);
        std::vector<Index> col(static_cast<std::size_t>(zeta_));
        for (Index j = 0; j < n; ++j) {
          for (Index k = 0; k < zeta_; ++k) {
            Index r;
            do {
              r = pick(rng);
            } while (std::find(col.begin(), col.begin() + k, r) != col.begin() + k);
            col[static_cast<std::size_t>(k)] = r;
          }
          for (Index k = 0; k < zeta_; ++k) {
            rows_[static_cast<std::size_t>(j * zeta_ + k)] = col[static_cast<std::size_t>(k)];
            signs_[static_cast<std::size_t>(j * zeta_ + k)] = (rng() & 1U) ? mag : -mag;
          }
        }
        break;
      }
      case EmbeddingKind::srdct: {
        signs_.resize(static_cast<std::size_t>(n));
        for (auto& v : signs_) v = (rng() & 1U) ? 1.0 : -1.0;
        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        for (Index i = 0; i < s; ++i) {
          std::uniform_int_distribution<Index> pick(i, n - 1);
          std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
        }
        rows_.assign(perm.begin(), perm.begin() + s);
        std::vector<double> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_.reset(fftw_plan_r2r_1d(static_cast<int>(n), in.data(), out.data(), FFTW_REDFT10,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED),
                    detail::FftwPlanDeleter{});
        if (!plan_) throw std::runtime_error("make_embedding: FFTW planning failed");
        break;
      }
    }
  }

  EmbeddingKind kind() const { return kind_; }
  Index rows() const { return s_; }
  Index cols() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  Index zeta() const { return zeta_; }

  Vector apply(const Vector& x) const {
    if (x.size() != n_)
      throw std::invalid_argument("sketch_apply: vector length " + std::to_string(x.size()) +
                                  " does not match embedding dimension " + std::to_string(n_));
    Vector y = Vector::Zero(s_);
    switch (kind_) {
      case EmbeddingKind::gaussian:
        y.noalias() = gaussian_ * x;
        break;
      case EmbeddingKind::sparse_sign:
        for (Index j = 0; j < n_; ++j) {
          const double xj = x[j];
          const std::size_t base = static_cast<std::size_t>(j * zeta_);
          for (Index k = 0; k < zeta_; ++k) y[rows_[base + k]] += signs_[base + k] * xj;
        }
        break;
      case EmbeddingKind::srdct: {
        std::vector<double> in(static_cast<std::size_t>(n_)), out(static_cast<std::size_t>(n_));
        for (Index j = 0; j < n_; ++j) in[static_cast<std::size_t>(j)] = signs_[static_cast<std::size_t>(j)] * x[j];
        fftw_execute_r2r(plan_.get(), in.data(), out.data());
        // FFTW's REDFT10 is 2x the unnormalized DCT-II.
        const double nd = static_cast<double>(n_);
        const double base = 1.0 / std::sqrt(2.0 * nd);
        const double subsample = std::sqrt(nd / static_cast<double>(s_));
        for (Index i = 0; i < s_; ++i) {
          const Index k = rows_[static_cast<std::size_t>(i)];
          const double c = k == 0 ? base / std::sqrt(2.0) : base;
          y[i] = subsample * c * out[static_cast<std::size_t>(k)];
        }
        break;
      }
    }
    return y;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(s_, x.cols());
    for (Index j = 0; j < x.cols(); ++j) out.col(j) = apply(Vector(x.col(j)));
    return out;
  }

  /// Explicit S; intended for small test sizes.
  Matrix dense() const { return apply(Matrix(Matrix::Identity(n_, n_))); }

  nlohmann::json descriptor() const {
    nlohmann::json j{{"kind", to_string(kind_)}, {"s", s_}, {"n", n_}, {"seed", seed_}};
    if (kind_ == EmbeddingKind::sparse_sign) j["zeta"] = zeta_;
    return j;
  }

 private:
  EmbeddingKind kind_;
  Index s_;
  Index n_;
  std::uint64_t seed_;
  Index zeta_ = 0;
  Matrix gaussian_;
  std::vector<Index> rows_;
  std::vector<double> signs_;
  std::shared_ptr<fftw_plan_s> plan_;
};

inline Embedding make_embedding(EmbeddingKind kind, Index s, Index n, std::uint64_t seed) {
  return {kind, s, n, seed};
}

inline Vector sketch_apply(const Embedding& s, const Vector& x) { return s.apply(x); }

/// ε̂ = max(1 - σ_min², σ_max² - 1) from an already sketched orthonormal
/// basis S V.
inline double epsilon_from_sketched(const Matrix& sv) {
  if (sv.cols() == 0) return 0.0;
  const Vector sigma = Eigen::BDCSVD<Matrix>(sv).singularValues();
  const double smax = sigma(0);
  const double smin = sv.rows() >= sv.cols() ? sigma(sigma.size() - 1) : 0.0;
  return std::max(1.0 - smin * smin, smax * smax - 1.0);
}

/// The smallest ε for which S is an ε-embedding of range(V), measured on
/// the singular values of S V.
inline double estimate_epsilon(const Embedding& s, const Matrix& v) {
  detail::require(v.rows() == s.cols(), "estimate_epsilon: row count mismatch");
  const double orth = (v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).norm();
  detail::require(orth <= 1e-10, "estimate_epsilon: V must have orthonormal columns");
  return epsilon_from_sketched(s.apply(v));
}

}  // namespace skrylov

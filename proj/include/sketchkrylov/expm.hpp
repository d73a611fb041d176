#pragma once

#include <array>
#include <cmath>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/spectral.hpp"

namespace skrylov {

namespace detail {

// Backward-error thresholds on the 1-norm for the [m/m] Padé approximants.
inline constexpr std::array<double, 5> pade_theta = {
    1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
    2.097847961257068e0, 5.371920351148152e0};

inline Matrix pade_solve(const Matrix& u, const Matrix& v) {
  return (v - u).partialPivLu().solve(v + u);
}

inline Matrix pade_low(const Matrix& a, int m) {
  static constexpr std::array<double, 4> b3 = {120.0, 60.0, 12.0, 1.0};
  static constexpr std::array<double, 6> b5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  static constexpr std::array<double, 8> b7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                               25200.0,    1512.0,    56.0,      1.0};
  static constexpr std::array<double, 10> b9 = {
      17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
      2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  const double* b = m == 3 ? b3.data() : m == 5 ? b5.data() : m == 7 ? b7.data() : b9.data();
  const Index n = a.rows();
  const Matrix a2 = a * a;
  Matrix power = Matrix::Identity(n, n);
  Matrix odd = Matrix::Zero(n, n);
  Matrix even = Matrix::Zero(n, n);
  for (int k = 0; 2 * k <= m; ++k) {
    even += b[2 * k] * power;
    if (2 * k + 1 <= m) odd += b[2 * k + 1] * power;
    if (2 * k + 2 <= m) power = power * a2;
  }
  return pade_solve(a * odd, even);
}

inline Matrix pade13(const Matrix& a) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  const Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                         b[3] * a2 + b[1] * ident;
  const Matrix u = a * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                   b[2] * a2 + b[0] * ident;
  return pade_solve(u, v);
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3..13; the scaling power comes from the
/// 1-norm thresholds `pade_theta`.
inline Matrix expm(const Matrix& m) {
  detail::require(m.rows() == m.cols(), "expm: matrix must be square");
  detail::require_finite(m, "expm");
  if (m.rows() == 0) return m;
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  constexpr std::array<int, 4> low_degrees = {3, 5, 7, 9};
  for (std::size_t i = 0; i < low_degrees.size(); ++i)
    if (norm1 <= detail::pade_theta[i]) return detail::pade_low(m, low_degrees[i]);

  int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / detail::pade_theta[4]))));
  Matrix x = detail::pade13(m / std::ldexp(1.0, squarings));
  for (int k = 0; k < squarings; ++k) {
    x = x * x;
    if (!x.allFinite())
      throw numerical_error("expm: overflow during squaring (scaling power " +
                            std::to_string(squarings) + ", step " + std::to_string(k + 1) + ")");
  }
  return x;
}

/// exp(M) = Z exp(R) Zᵀ with M = Z R Zᵀ the real Schur form.
inline Matrix expm_via_schur(const Matrix& m) {
  const SchurForm schur = real_schur(m);
  if (m.rows() == 0) return m;
  return schur.Z * expm(schur.R) * schur.Z.transpose();
}

}  // namespace skrylov

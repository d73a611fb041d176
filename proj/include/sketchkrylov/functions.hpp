#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/expm.hpp"

namespace skrylov {

/// A scalar analytic function together with what the matrix-function
/// code needs from it.
struct AnalyticFunction {
  std::string name;
  std::function<cplx(cplx)> value;
  /// k-th derivative, k >= 1; valid for k <= max_derivative_order.
  std::function<cplx(cplx, int)> derivative;
  /// -1 means derivatives of every order are available.
  int max_derivative_order = 0;
  /// Real matrix function; when empty, callers fall back to funm_eig.
  std::function<Matrix(const Matrix&)> matrix;
  /// max |f^(order)| over the closed disc {|z - center| <= radius}.
  std::function<double(cplx center, double radius, int order)> derivative_bound;
  /// Set when f(z) = exp(scale * z); enables the Schur-based route.
  std::optional<double> exp_scale;

  cplx operator()(cplx z) const { return value(z); }
  bool has_derivative(int order) const {
    return static_cast<bool>(derivative) && (max_derivative_order < 0 || order <= max_derivative_order);
  }
};

/// f(z) = exp(scale * z). `scale = -1` gives the negated exponential.
inline AnalyticFunction exp_function(double scale = 1.0) {
  AnalyticFunction f;
  f.name = scale == 1.0 ? "exp" : scale == -1.0 ? "nexp" : "exp(" + std::to_string(scale) + "z)";
  f.value = [scale](cplx z) { return std::exp(scale * z); };
  f.derivative = [scale](cplx z, int k) { return std::pow(scale, k) * std::exp(scale * z); };
  f.max_derivative_order = -1;
  f.matrix = [scale](const Matrix& m) { return expm(scale * m); };
  f.derivative_bound = [scale](cplx c, double r, int k) {
    // |exp(scale z)| peaks where Re(scale z) is largest on the disc.
    return std::pow(std::abs(scale), k) * std::exp((scale * c).real() + std::abs(scale) * r);
  };
  f.exp_scale = scale;
  return f;
}

/// Monomial z^power with exact derivatives (zero beyond `power`).
inline AnalyticFunction power_function(int power) {
  AnalyticFunction f;
  f.name = "z^" + std::to_string(power);
  f.value = [power](cplx z) { return std::pow(z, power); };
  f.derivative = [power](cplx z, int k) {
    if (k > power) return cplx(0.0);
    double c = 1.0;
    for (int i = 0; i < k; ++i) c *= static_cast<double>(power - i);
    return c * std::pow(z, power - k);
  };
  f.max_derivative_order = -1;
  f.matrix = [power](const Matrix& m) {
    Matrix out = Matrix::Identity(m.rows(), m.cols());
    for (int i = 0; i < power; ++i) out = out * m;
    return out;
  };
  f.derivative_bound = [power](cplx c, double r, int k) {
    if (k > power) return 0.0;
    double coef = 1.0;
    for (int i = 0; i < k; ++i) coef *= static_cast<double>(power - i);
    return coef * std::pow(std::abs(c) + r, power - k);
  };
  return f;
}

inline AnalyticFunction function_by_name(const std::string& name) {
  if (name == "exp") return exp_function(1.0);
  if (name == "nexp") return exp_function(-1.0);
  throw std::invalid_argument("unknown function '" + name + "' (expected exp or nexp)");
}

}  // namespace skrylov

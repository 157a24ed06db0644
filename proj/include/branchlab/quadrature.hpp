#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <utility>

namespace branchlab {

namespace detail {

inline double value_norm(double v) { return std::abs(v); }
inline double value_norm(const std::complex<double>& v) { return std::abs(v); }
template <class Derived>
double value_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.derived().cwiseAbs().maxCoeff();
}

// Integrands may return Eigen expressions; evaluate them into plain storage.
template <class U, class = void>
struct Plain {
  using type = U;
};
template <class U>
struct Plain<U, std::void_t<typename U::PlainObject>> {
  using type = typename U::PlainObject;
};
template <class U>
using plain_t = typename Plain<std::decay_t<U>>::type;

template <class T>
struct ZeroLike {
  static T zero(const T&) { return T{}; }
};
template <>
struct ZeroLike<Eigen::VectorXd> {
  static Eigen::VectorXd zero(const Eigen::VectorXd& like) {
    return Eigen::VectorXd::Zero(like.size());
  }
};
template <>
struct ZeroLike<Eigen::VectorXcd> {
  static Eigen::VectorXcd zero(const Eigen::VectorXcd& like) {
    return Eigen::VectorXcd::Zero(like.size());
  }
};

template <class F, class T>
T simpson_recurse(F& f, double a, double b, const T& fa, const T& fm, const T& fb,
                  const T& whole, double tol, int depth, double& err_accum) {
  const double m = 0.5 * (a + b);
  const double h = b - a;
  const T fl = f(0.5 * (a + m));
  const T fr = f(0.5 * (m + b));
  const T left = (h / 12.0) * (fa + 4.0 * fl + fm);
  const T right = (h / 12.0) * (fm + 4.0 * fr + fb);
  const T sum = left + right;
  const double err = value_norm(T(sum - whole)) / 15.0;
  if (depth <= 0 || err <= tol) {
    err_accum += err;
    return sum + (1.0 / 15.0) * (sum - whole);
  }
  return simpson_recurse(f, a, m, fa, fl, fm, left, 0.5 * tol, depth - 1, err_accum) +
         simpson_recurse(f, m, b, fm, fr, fb, right, 0.5 * tol, depth - 1, err_accum);
}

}  // namespace detail

struct QuadratureResult {
  double error_bound = 0.0;  // accumulated local estimates plus any tail bound
};

/// Adaptive Simpson on [a,b] for scalar, complex or Eigen-vector integrands.
/// `atol` is an absolute tolerance on the accumulated error estimate.
template <class F>
auto adaptive_simpson(F&& f, double a, double b, double atol,
                      QuadratureResult* result = nullptr) {
  using T = detail::plain_t<decltype(f(a))>;
  const T fa = f(a);
  if (b <= a) {
    if (result) result->error_bound = 0.0;
    return detail::ZeroLike<T>::zero(fa);
  }
  const double m = 0.5 * (a + b);
  const T fm = f(m);
  const T fb = f(b);
  const T whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
  double err = 0.0;
  T value = detail::simpson_recurse(f, a, b, fa, fm, fb, whole, atol, 48, err);
  if (result) result->error_bound = err;
  return value;
}

/// Same, but the interval is pre-split into panels no longer than an eighth
/// of the oscillation period 2*pi/|omega|, so the adaptive refinement never
/// sees a panel holding a full cycle of e^{i omega s}.
template <class F>
auto oscillatory_simpson(F&& f, double a, double b, double omega, double atol,
                         QuadratureResult* result = nullptr) {
  using T = detail::plain_t<decltype(f(a))>;
  if (b <= a) {
    const T fa = f(a);
    if (result) result->error_bound = 0.0;
    return detail::ZeroLike<T>::zero(fa);
  }
  double panel = b - a;
  if (omega != 0.0)
    panel = std::min(panel, 2.0 * 3.14159265358979323846 / std::abs(omega) / 8.0);
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
  const double h = (b - a) / n;
  double err_total = 0.0;
  QuadratureResult local;
  T total = adaptive_simpson(f, a, a + h, atol / n, &local);
  err_total += local.error_bound;
  for (int i = 1; i < n; ++i) {
    total = total + adaptive_simpson(f, a + i * h, a + (i + 1) * h, atol / n, &local);
    err_total += local.error_bound;
  }
  if (result) result->error_bound = err_total;
  return total;
}

/// Truncation horizon T* such that a tail bounded by C e^{-gamma s} integrates
/// to less than `tail_tol` beyond T*.
inline double tail_horizon(double C, double gamma, double tail_tol = 1e-12,
                           double t_min = 1.0) {
  if (gamma <= 0.0 || C <= 0.0) return t_min;
  const double t = std::log(C / (gamma * tail_tol)) / gamma;
  return std::max(t_min, t);
}

/// Improper integral over [0, inf) of an integrand dominated by C e^{-gamma s}:
/// adaptive Simpson on [0, T*] with the analytic tail added to the error bound.
template <class F>
auto integrate_to_infinity(F&& f, double C, double gamma, double omega, double atol,
                           QuadratureResult* result = nullptr) {
  const double horizon = tail_horizon(C, gamma);
  QuadratureResult local;
  auto value = oscillatory_simpson(std::forward<F>(f), 0.0, horizon, omega, atol, &local);
  if (result) result->error_bound = local.error_bound + C * std::exp(-gamma * horizon) / gamma;
  return value;
}

}  // namespace branchlab

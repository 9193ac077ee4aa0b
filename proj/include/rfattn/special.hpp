#pragma once

// Probabilists' Hermite polynomials, Gaussian pdf/cdf, the shifted-ReLU
// Hermite expansion, and a closed form for E[relu(Z1 + h1) relu(Z2 + h2)]
// under a correlated standard bivariate normal.

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rfattn/errors.hpp"

namespace rfattn {

/// He_n(x) by the upward three-term recurrence He_{n+1} = x He_n - n He_{n-1}.
inline double hermite_eval(int n, double x) {
  if (n < 0) throw DomainError("Hermite degree must be non-negative");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// He_0(x) .. He_max(x).
inline std::vector<double> hermite_values(int max_degree, double x) {
  std::vector<double> out(static_cast<std::size_t>(std::max(max_degree, 0)) + 1, 1.0);
  if (max_degree >= 1) out[1] = x;
  for (int k = 1; k < max_degree; ++k) out[k + 1] = x * out[k] - k * out[k - 1];
  return out;
}

inline double gaussian_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double gaussian_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// n! as a double; exact up to n = 22, correctly rounded well beyond.
inline double factorial(int n) {
  if (n < 0) throw DomainError("factorial of a negative integer");
  double out = 1.0;
  for (int k = 2; k <= n; ++k) out *= k;
  return out;
}

/// n!! with the conventions 0!! = (-1)!! = 1.
inline double double_factorial(int n) {
  if (n < -1) throw DomainError("double factorial below -1");
  double out = 1.0;
  for (int k = n; k > 1; k -= 2) out *= k;
  return out;
}

/// f(x) = sum_n coeffs[n] He_n(x).
struct HermiteSeries {
  std::vector<double> coeffs;

  HermiteSeries() = default;
  explicit HermiteSeries(std::vector<double> c) : coeffs(std::move(c)) {}

  [[nodiscard]] int truncation_order() const noexcept { return static_cast<int>(coeffs.size()) - 1; }

  [[nodiscard]] double operator()(double x) const {
    if (coeffs.empty()) return 0.0;
    const auto he = hermite_values(truncation_order(), x);
    double sum = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n) sum += coeffs[n] * he[n];
    return sum;
  }

  /// E[f(Z)^2] for Z ~ N(0,1), using E[He_m He_n] = n! 1{m=n}.
  [[nodiscard]] double gaussian_norm_squared() const {
    double sum = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n) sum += factorial(static_cast<int>(n)) * coeffs[n] * coeffs[n];
    return sum;
  }
};

/// x^n = n! sum_m He_{n-2m}(x) / (2^m m! (n-2m)!).
inline HermiteSeries monomial_hermite_coeffs(int n) {
  if (n < 0) throw DomainError("monomial degree must be non-negative");
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  const double nf = factorial(n);
  for (int m = 0; 2 * m <= n; ++m) {
    c[n - 2 * m] = nf / (std::ldexp(1.0, m) * factorial(m) * factorial(n - 2 * m));
  }
  return HermiteSeries(std::move(c));
}

/// Hermite expansion of relu(x + c):
///   c Phi(c) + phi(c) + Phi(c) He_1(x) + sum_{n>=2} (-1)^n phi(c) He_{n-2}(c) He_n(x) / n!.
inline HermiteSeries shifted_relu_hermite_coeffs(double c, int order) {
  if (order < 2) throw DomainError("shifted-ReLU expansion needs order >= 2");
  std::vector<double> out(static_cast<std::size_t>(order) + 1, 0.0);
  const double pdf = gaussian_pdf(c);
  const double cdf = gaussian_cdf(c);
  out[0] = c * cdf + pdf;
  out[1] = cdf;
  const auto he = hermite_values(order - 2, c);
  for (int n = 2; n <= order; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    out[n] = sign * pdf * he[n - 2] / factorial(n);
  }
  return HermiteSeries(std::move(out));
}

/// P(X > h, Y > k) for standard bivariate normal with correlation rho.
/// Drezner-Wesolowsky / Genz (BVND) with 20-point Gauss-Legendre.
inline double bivariate_normal_upper(double h, double k, double rho) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  using Quad = boost::math::quadrature::gauss<double, 20>;
  const auto& nodes = Quad::abscissa();
  const auto& weights = Quad::weights();

  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(rho) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(rho);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (double sgn : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (sgn * nodes[i] + 1.0) / 2.0);
        bvn += weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (2.0 * two_pi);
    return bvn + gaussian_cdf(-h) * gaussian_cdf(-k);
  }

  if (rho < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(rho) < 1.0) {
    const double as = (1.0 - rho) * (1.0 + rho);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * gaussian_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (double sgn : {-1.0, 1.0}) {
        const double xs = std::pow(a * (sgn * nodes[i] + 1.0), 2);
        const double rs = std::sqrt(1.0 - xs);
        bvn += a * weights[i] *
               (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
                std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      }
    }
    bvn = -bvn / two_pi;
  }
  if (rho > 0.0) return bvn + gaussian_cdf(-std::max(h, k));
  bvn = -bvn;
  if (k > h) {
    bvn += (h < 0.0) ? gaussian_cdf(k) - gaussian_cdf(h) : gaussian_cdf(-h) - gaussian_cdf(-k);
  }
  return bvn;
}

/// E[relu(Z1 + h1) relu(Z2 + h2)] for (Z1, Z2) standard normal with correlation rho,
/// from the first and second moments of a truncated bivariate normal.
inline double relu_pair_expectation(double h1, double h2, double rho) {
  if (!(std::abs(rho) <= 1.0 + 1e-9)) throw DomainError("correlation outside [-1, 1]");
  rho = std::clamp(rho, -1.0, 1.0);
  constexpr double kEdge = 1e-12;
  if (rho >= 1.0 - kEdge) {
    const double lo = std::min(h1, h2);
    const double hi = std::max(h1, h2);
    return (1.0 + h1 * h2) * gaussian_cdf(lo) + hi * gaussian_pdf(lo);
  }
  if (rho <= -1.0 + kEdge) {
    if (h1 + h2 <= 0.0) return 0.0;
    const double mass = gaussian_cdf(h1) + gaussian_cdf(h2) - 1.0;
    return (h1 * h2 - 1.0) * mass + h2 * gaussian_pdf(h1) + h1 * gaussian_pdf(h2);
  }
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  const double a = -h1;
  const double b = -h2;
  const double mass = bivariate_normal_upper(a, b, rho);
  const double qa = gaussian_cdf(-(b - rho * a) / s);  // P(Z2 > b | Z1 = a)
  const double qb = gaussian_cdf(-(a - rho * b) / s);  // P(Z1 > a | Z2 = b)
  const double pa = gaussian_pdf(a);
  const double pb = gaussian_pdf(b);
  const double m1 = pa * qa + rho * pb * qb;
  const double m2 = pb * qb + rho * pa * qa;
  const double q2 = (a * a - 2.0 * rho * a * b + b * b) / (s * s);
  const double m12 = rho * mass + rho * a * pa * qa + rho * b * pb * qb + s * gaussian_pdf(std::sqrt(q2)) *
                                                                             (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return m12 + h2 * m1 + h1 * m2 + h1 * h2 * mass;
}

}  // namespace rfattn

#pragma once

// Infinite-width kernels of the attention models, their Monte-Carlo
// finite-width estimates, Gram assembly and kernel ridge regression.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/features.hpp"
#include "rfattn/geometry.hpp"
#include "rfattn/linalg.hpp"
#include "rfattn/parallel.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/special.hpp"

namespace rfattn {

enum class KernelKind { kRFAAnalytic, kBRFAAnalytic, kMCEmpirical };

struct KernelSpec {
  KernelKind kind = KernelKind::kRFAAnalytic;
  int series_truncation = 40;
  int mc_heads = 1000;
  double bias_scale = 0.0;
  ModelKind mc_model = ModelKind::kRFA;
  std::uint64_t mc_seed = 0;

  static KernelSpec rfa() { return {}; }

  static KernelSpec brfa(double bias_scale, int truncation = 40) {
    KernelSpec s;
    s.kind = KernelKind::kBRFAAnalytic;
    s.bias_scale = bias_scale;
    s.series_truncation = truncation;
    return s;
  }

  static KernelSpec monte_carlo(ModelKind model, int heads, std::uint64_t seed, double bias_scale = 0.0) {
    KernelSpec s;
    s.kind = KernelKind::kMCEmpirical;
    s.mc_model = model;
    s.mc_heads = heads;
    s.mc_seed = seed;
    s.bias_scale = bias_scale;
    return s;
  }

  void validate() const {
    if (series_truncation < 2) throw InvalidConfig("series_truncation must be >= 2");
    if (mc_heads < 1) throw InvalidConfig("mc_heads must be >= 1");
    if (!(bias_scale >= 0.0) || !std::isfinite(bias_scale)) throw InvalidConfig("bias_scale must be finite and >= 0");
  }
};

/// E[relu(Z1) relu(Z2)] for standard normals with correlation u:
/// (sqrt(1-u^2) + u (pi/2 + asin u)) / (2 pi).
inline double arccos_relu_kernel(double u) {
  if (!(std::abs(u) <= 1.0 + 1e-9)) throw DomainError("correlation " + std::to_string(u) + " outside [-1, 1]");
  u = std::clamp(u, -1.0, 1.0);
  return (std::sqrt((1.0 - u) * (1.0 + u)) + u * (0.5 * std::numbers::pi + std::asin(u))) * (0.5 * std::numbers::inv_pi);
}

/// The same expectation from the Hermite expansion of relu:
/// sum_{n <= truncation} n! a_n^2 u^n with a_n the relu(x + 0) coefficients.
inline double relu_kernel_hermite_series(double u, int truncation = 40) {
  if (!(std::abs(u) <= 1.0 + 1e-9)) throw DomainError("correlation outside [-1, 1]");
  const HermiteSeries relu = shifted_relu_hermite_coeffs(0.0, truncation);
  double sum = 0.0;
  double un = 1.0;
  for (int n = 0; n <= truncation; ++n) {
    sum += factorial(n) * relu.coeffs[n] * relu.coeffs[n] * un;
    un *= u;
  }
  return sum;
}

namespace detail {

inline void check_pair(const TokenSequence& x, const TokenSequence& y) {
  if (x.dim() != y.dim()) {
    throw ShapeError("token dimensions differ: " + std::to_string(x.dim()) + " vs " + std::to_string(y.dim()));
  }
}

// u_ij = <x0~, x0'~><xi~, xj'~> / 4 and the key inner products <xi~, xj'~>.
struct PairGeometry {
  Eigen::MatrixXd key_inner;  // N x N'
  double query_inner = 0.0;
};

inline PairGeometry pair_geometry(const TokenSequence& x, const TokenSequence& y) {
  PairGeometry g;
  g.key_inner = x.augmented_keys().transpose() * y.augmented_keys();
  g.query_inner = x.augmented_query().dot(y.augmented_query());
  return g;
}

/// Bias offsets h_i = gamma <x0, x_i>.
inline Eigen::VectorXd bias_offsets(const TokenSequence& x, double gamma) {
  return gamma * (x.keys() * x.query());
}

struct SeriesResult {
  double value = 0.0;
  bool converged = false;
  int terms = 0;
};

}  // namespace detail

/// Hermite series for E[relu(Z1 + h1) relu(Z2 + h2)] with corr(Z1, Z2) = u:
///   a0(h1) a0(h2) + Phi(h1) Phi(h2) u + phi(h1) phi(h2) sum_{l>=2} He_{l-2}(h1) He_{l-2}(h2) u^l / l!
/// with a0(h) = h Phi(h) + phi(h). Uses normalized Hermite values
/// He_n / sqrt(n!) and stops once Cramer's inequality bounds the remaining
/// tail below 1e-12 of the partial sum. `converged` is false if that did not
/// happen within `truncation` terms.
inline detail::SeriesResult relu_pair_series(double h1, double h2, double u, int truncation) {
  if (truncation < 2) throw InvalidConfig("series truncation must be >= 2");
  if (!(std::abs(u) <= 1.0 + 1e-9)) throw DomainError("correlation outside [-1, 1]");
  u = std::clamp(u, -1.0, 1.0);
  const double p1 = gaussian_pdf(h1);
  const double p2 = gaussian_pdf(h2);
  const double c1 = gaussian_cdf(h1);
  const double c2 = gaussian_cdf(h2);
  detail::SeriesResult r;
  r.value = (h1 * c1 + p1) * (h2 * c2 + p2) + c1 * c2 * u;
  r.terms = 2;
  const double au = std::abs(u);
  // |He_n(x)| / sqrt(n!) <= 1.0865 exp(x^2 / 4).
  const double envelope = p1 * p2 * 1.0865 * 1.0865 * std::exp(0.25 * (h1 * h1 + h2 * h2));
  double e1_prev = 0.0;
  double e1 = 1.0;
  double e2_prev = 0.0;
  double e2 = 1.0;
  double ul = u * u;
  for (int l = 2; l <= truncation; ++l) {
    const int n = l - 2;  // e1, e2 hold normalized He_n
    r.value += p1 * p2 * e1 * e2 * ul / (static_cast<double>(l) * (l - 1));
    r.terms = l + 1;
    // Remaining tail sum_{k > l} |u|^k / (k (k-1)), bounded geometrically.
    const double aul = std::pow(au, l + 1);
    const double tail = (au < 1.0) ? envelope * aul / (static_cast<double>(l + 1) * l * (1.0 - au))
                                   : envelope / static_cast<double>(l);
    if (tail <= 1e-12 * std::abs(r.value)) {
      r.converged = true;
      return r;
    }
    const double s = std::sqrt(static_cast<double>(n + 1));
    const double next1 = (h1 * e1 - std::sqrt(static_cast<double>(n)) * e1_prev) / s;
    const double next2 = (h2 * e2 - std::sqrt(static_cast<double>(n)) * e2_prev) / s;
    e1_prev = e1;
    e1 = next1;
    e2_prev = e2;
    e2 = next2;
    ul *= u;
  }
  return r;
}

/// Series value where it converges within `truncation` terms, else the exact
/// truncated-bivariate-normal closed form.
inline double relu_pair_kernel(double h1, double h2, double u, int truncation) {
  const auto s = relu_pair_series(h1, h2, u, truncation);
  if (s.converged) return s.value;
  return relu_pair_expectation(h1, h2, u);
}

/// Infinite-width RFA kernel:
/// (1/(N N')) sum_{i,j} kappa(u_ij) <xi~, xj'~>, u_ij = <x0~, x0'~><xi~, xj'~> / 4.
inline double rfa_kernel(const TokenSequence& x, const TokenSequence& y) {
  detail::check_pair(x, y);
  const auto g = detail::pair_geometry(x, y);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < g.key_inner.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.key_inner.rows(); ++i) {
      const double kij = g.key_inner(i, j);
      sum += arccos_relu_kernel(0.25 * g.query_inner * kij) * kij;
    }
  }
  return sum / (static_cast<double>(x.length()) * y.length());
}

/// Infinite-width BRFA kernel with bias scale gamma: as rfa_kernel, with each
/// pair term E[relu(Z + h_i) relu(Z' + h_j')].
inline double brfa_kernel(const TokenSequence& x, const TokenSequence& y, const KernelSpec& spec) {
  if (spec.kind != KernelKind::kBRFAAnalytic) throw InvalidConfig("brfa_kernel needs a BRFA_analytic spec");
  spec.validate();
  detail::check_pair(x, y);
  const auto g = detail::pair_geometry(x, y);
  const Eigen::VectorXd hx = detail::bias_offsets(x, spec.bias_scale);
  const Eigen::VectorXd hy = detail::bias_offsets(y, spec.bias_scale);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < g.key_inner.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.key_inner.rows(); ++i) {
      const double kij = g.key_inner(i, j);
      sum += relu_pair_kernel(hx(i), hy(j), 0.25 * g.query_inner * kij, spec.series_truncation) * kij;
    }
  }
  return sum / (static_cast<double>(x.length()) * y.length());
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

/// Per-head mean and standard error of <feature_m(X), feature_m(X')> over
/// `heads` freshly sampled heads.
inline McEstimate mc_kernel(const TokenSequence& x, const TokenSequence& y, ModelKind model, RngStream& stream,
                            int heads, double bias_scale = 0.0) {
  if (heads < 2) throw InvalidConfig("mc_kernel needs at least 2 heads");
  detail::check_pair(x, y);
  if (!is_attention(model) && x.length() != y.length()) {
    throw ShapeError("RFMLP kernel needs equal sequence lengths");
  }
  const HeadWeights w = sample_weights(stream, model, heads, x.dim(), x.length(), bias_scale);
  const Eigen::VectorXd fx = detail::feature_row(w, x);
  const Eigen::VectorXd fy = detail::feature_row(w, y);
  const int b = w.block_size();
  double mean = 0.0;
  double m2 = 0.0;
  for (int m = 0; m < heads; ++m) {
    const double v = fx.segment(static_cast<Eigen::Index>(m) * b, b).dot(fy.segment(static_cast<Eigen::Index>(m) * b, b));
    const double delta = v - mean;
    mean += delta / (m + 1);
    m2 += delta * (v - mean);
  }
  McEstimate out;
  out.estimate = mean;
  out.stderr_ = std::sqrt(m2 / (heads - 1) / heads);
  return out;
}

/// One kernel entry. For MC_empirical the heads are drawn from a stream
/// determined by `spec.mc_seed` alone, so every entry uses the same weights.
inline double kernel_eval(const KernelSpec& spec, const TokenSequence& x, const TokenSequence& y) {
  spec.validate();
  switch (spec.kind) {
    case KernelKind::kRFAAnalytic: return rfa_kernel(x, y);
    case KernelKind::kBRFAAnalytic: return brfa_kernel(x, y, spec);
    case KernelKind::kMCEmpirical: {
      RngStream s = RngStream(spec.mc_seed).derive(StreamTag::kMonteCarlo, 0);
      const HeadWeights w = sample_weights(s, spec.mc_model, spec.mc_heads, x.dim(), x.length(), spec.bias_scale);
      return detail::feature_row(w, x).dot(detail::feature_row(w, y)) / spec.mc_heads;
    }
  }
  throw InvalidConfig("unknown kernel kind");
}

/// Symmetric Gram matrix; upper triangle computed, lower mirrored.
inline Eigen::MatrixXd gram(const KernelSpec& spec, std::span<const TokenSequence> batch, unsigned threads = 1) {
  spec.validate();
  if (batch.empty()) throw ShapeError("gram needs a non-empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (spec.kind == KernelKind::kMCEmpirical) {
    RngStream s = RngStream(spec.mc_seed).derive(StreamTag::kMonteCarlo, 0);
    const HeadWeights w =
        sample_weights(s, spec.mc_model, spec.mc_heads, batch[0].dim(), batch[0].length(), spec.bias_scale);
    const FeatureMatrix f = featurize(w, batch, threads);
    Eigen::MatrixXd g = (f.data * f.data.transpose()) / static_cast<double>(spec.mc_heads);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = j + 1; k < n; ++k) g(k, j) = g(j, k);
    }
    return g;
  }
  Eigen::MatrixXd g(n, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
    const auto j = static_cast<Eigen::Index>(row);
    for (Eigen::Index k = j; k < n; ++k) g(j, k) = kernel_eval(spec, batch[j], batch[k]);
  });
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j + 1; k < n; ++k) g(k, j) = g(j, k);
  }
  return g;
}

/// Dual coefficients alpha with (G + n lambda I) alpha = y.
inline Eigen::VectorXd kernel_ridge_fit(const Eigen::MatrixXd& g, const Eigen::VectorXd& y, double lambda) {
  if (g.rows() != g.cols() || g.rows() != y.size()) throw ShapeError("Gram matrix and labels disagree in size");
  if (!(lambda > 0.0)) throw InvalidConfig("kernel ridge needs lambda > 0");
  if (!g.isApprox(g.transpose(), 1e-12)) throw NumericalError("Gram matrix is not symmetric");
  Eigen::MatrixXd a = g;
  a.diagonal().array() += static_cast<double>(g.rows()) * lambda;
  return solve_spd(a, y, nullptr, "Gram matrix is not positive semidefinite");
}

/// Predictions sum_j alpha_j k(train_j, test).
inline Eigen::VectorXd kernel_ridge_predict(const KernelSpec& spec, std::span<const TokenSequence> train,
                                            const Eigen::VectorXd& alpha, std::span<const TokenSequence> test,
                                            unsigned threads = 1) {
  if (static_cast<Eigen::Index>(train.size()) != alpha.size()) throw ShapeError("alpha length != train size");
  Eigen::VectorXd out(static_cast<Eigen::Index>(test.size()));
  parallel_for(test.size(), threads, [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t j = 0; j < train.size(); ++j) s += alpha(static_cast<Eigen::Index>(j)) * kernel_eval(spec, train[j], test[t]);
    out(static_cast<Eigen::Index>(t)) = s;
  });
  return out;
}

}  // namespace rfattn

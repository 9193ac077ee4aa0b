#pragma once

// Target functions for the synthetic experiments and the complexity measures
// that govern the sample-complexity bounds of each model.
//
//   F1(p)     (1/N) sum_i <beta, x_i>^p
//   F2(q)     (1/N) sum_i <x0, x_i>^q <beta, x_i>
//   F3(p)     <beta, x0>^p
//   F4(gamma) (1/N) sum_i <x0, S x_i>^3 <beta, x_i>,  S = Z + gamma I,  Z_ij ~ N(0, 1/d)
//   Custom    a power series in one of <beta, x_i> (averaged over keys), <beta, x0>,
//             or <x0, x_i> times <beta, x_i>^s (averaged over keys)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/geometry.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/text.hpp"

namespace rfattn {

enum class TargetKind { kF1, kF2, kF3, kF4, kCustom };

/// Variable a custom power series acts on.
enum class SeriesForm { kKey, kQuery, kCorrelation };

namespace detail {

inline double ipow(double x, int n) {
  double out = 1.0;
  for (int k = 0; k < n; ++k) out *= x;
  return out;
}

inline std::string_view form_name(SeriesForm f) {
  switch (f) {
    case SeriesForm::kKey: return "key";
    case SeriesForm::kQuery: return "query";
    case SeriesForm::kCorrelation: return "correlation";
  }
  return "?";
}

}  // namespace detail

class TargetSpec {
 public:
  static TargetSpec f1(int d, int p, std::uint64_t beta_seed) { return seeded(TargetKind::kF1, d, p, beta_seed); }
  static TargetSpec f2(int d, int q, std::uint64_t beta_seed) { return seeded(TargetKind::kF2, d, q, beta_seed); }
  static TargetSpec f3(int d, int p, std::uint64_t beta_seed) { return seeded(TargetKind::kF3, d, p, beta_seed); }

  static TargetSpec f4(int d, double gamma, std::uint64_t beta_seed, std::uint64_t z_seed) {
    TargetSpec t = seeded(TargetKind::kF4, d, 3, beta_seed);
    if (!std::isfinite(gamma)) throw InvalidConfig("gamma must be finite");
    t.gamma_ = gamma;
    t.z_seed_ = z_seed;
    RngStream zs = RngStream(z_seed).derive(StreamTag::kTarget, 1);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    Eigen::MatrixXd s(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) s(i, j) = sd * zs.normal();
    }
    s.diagonal().array() += gamma;
    t.s_ = std::move(s);
    return t;
  }

  /// F1/F2/F3 with an explicit unit vector beta.
  static TargetSpec with_beta(TargetKind kind, int degree, Eigen::VectorXd beta) {
    if (kind == TargetKind::kF4 || kind == TargetKind::kCustom) {
      throw InvalidConfig("with_beta covers F1, F2 and F3 only");
    }
    TargetSpec t;
    t.kind_ = kind;
    t.degree_ = check_degree(degree);
    t.set_beta(std::move(beta));
    return t;
  }

  /// F4 with an explicit matrix S (gamma is reported as NaN).
  static TargetSpec f4_with_matrix(Eigen::MatrixXd s, Eigen::VectorXd beta) {
    TargetSpec t;
    t.kind_ = TargetKind::kF4;
    t.degree_ = 3;
    t.set_beta(std::move(beta));
    if (s.rows() != t.dim() || s.cols() != t.dim()) throw ShapeError("S must be d x d");
    t.gamma_ = std::nan("");
    t.s_ = std::move(s);
    return t;
  }

  static TargetSpec custom(SeriesForm form, std::vector<double> coeffs, Eigen::VectorXd beta, int key_degree = 0) {
    if (coeffs.empty()) throw InvalidConfig("custom series needs at least one coefficient");
    if (form == SeriesForm::kCorrelation && key_degree < 0) throw InvalidConfig("key_degree must be >= 0");
    if (form != SeriesForm::kCorrelation && key_degree != 0) throw InvalidConfig("key_degree applies to correlation series only");
    TargetSpec t;
    t.kind_ = TargetKind::kCustom;
    t.form_ = form;
    t.coeffs_ = std::move(coeffs);
    t.key_degree_ = key_degree;
    t.degree_ = static_cast<int>(t.coeffs_.size()) - 1;
    t.set_beta(std::move(beta));
    return t;
  }

  static TargetSpec custom_seeded(int d, SeriesForm form, std::vector<double> coeffs, std::uint64_t beta_seed,
                                  int key_degree = 0) {
    TargetSpec t = custom(form, std::move(coeffs), beta_from_seed(d, beta_seed), key_degree);
    t.beta_seed_ = beta_seed;
    return t;
  }

  /// psi(z) = z arctan(z / eta) applied to <beta, x_i> and averaged over keys,
  /// truncated to its first `terms` non-zero power-series terms.
  static TargetSpec arctan_preset(int d, double eta, std::uint64_t beta_seed, int terms = 20) {
    if (!(eta > 0.0)) throw InvalidConfig("eta must be positive");
    if (terms < 1) throw InvalidConfig("arctan preset needs at least one term");
    std::vector<double> c(static_cast<std::size_t>(2 * terms + 1), 0.0);
    for (int k = 0; k < terms; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      c[2 * k + 2] = sign / ((2.0 * k + 1.0) * std::pow(eta, 2 * k + 1));
    }
    TargetSpec t = custom_seeded(d, SeriesForm::kKey, std::move(c), beta_seed);
    t.eta_ = eta;
    t.arctan_terms_ = terms;
    return t;
  }

  [[nodiscard]] TargetKind kind() const noexcept { return kind_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(beta_.size()); }
  [[nodiscard]] int degree() const noexcept { return degree_; }
  [[nodiscard]] double gamma() const noexcept { return gamma_; }
  [[nodiscard]] const Eigen::VectorXd& beta() const noexcept { return beta_; }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return s_; }
  [[nodiscard]] SeriesForm form() const noexcept { return form_; }
  [[nodiscard]] const std::vector<double>& coeffs() const noexcept { return coeffs_; }
  [[nodiscard]] int key_degree() const noexcept { return key_degree_; }
  [[nodiscard]] std::optional<std::uint64_t> beta_seed() const noexcept { return beta_seed_; }
  [[nodiscard]] std::optional<std::uint64_t> z_seed() const noexcept { return z_seed_; }
  [[nodiscard]] std::optional<double> eta() const noexcept { return eta_; }

  /// Short identifier used in CSV rows and file names, e.g. f1_p2, f2_q3, f4_g8.
  [[nodiscard]] std::string id() const {
    switch (kind_) {
      case TargetKind::kF1: return "f1_p" + std::to_string(degree_);
      case TargetKind::kF2: return "f2_q" + std::to_string(degree_);
      case TargetKind::kF3: return "f3_p" + std::to_string(degree_);
      case TargetKind::kF4: return std::isnan(gamma_) ? std::string("f4_custom") : "f4_g" + format_double(gamma_);
      case TargetKind::kCustom:
        if (eta_) return "arctan_eta" + format_double(*eta_);
        if (form_ == SeriesForm::kCorrelation) return "custom_correlation_s" + std::to_string(key_degree_);
        return "custom_" + std::string(detail::form_name(form_));
    }
    return "?";
  }

  [[nodiscard]] double operator()(const TokenSequence& x) const { return evaluate(x); }

  [[nodiscard]] double evaluate(const TokenSequence& x) const {
    if (x.dim() != dim()) {
      throw ShapeError("target dimension " + std::to_string(dim()) + " != input dimension " + std::to_string(x.dim()));
    }
    const int n = x.length();
    const Eigen::VectorXd bk = x.keys() * beta_;  // <beta, x_i>
    switch (kind_) {
      case TargetKind::kF1: {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += detail::ipow(bk(i), degree_);
        return s / n;
      }
      case TargetKind::kF2: {
        const Eigen::VectorXd c = x.keys() * x.query();
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += detail::ipow(c(i), degree_) * bk(i);
        return s / n;
      }
      case TargetKind::kF3: return detail::ipow(beta_.dot(x.query()), degree_);
      case TargetKind::kF4: {
        const Eigen::VectorXd c = x.keys() * (s_.transpose() * x.query());  // <x0, S x_i>
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += detail::ipow(c(i), 3) * bk(i);
        return s / n;
      }
      case TargetKind::kCustom: {
        if (form_ == SeriesForm::kQuery) return series(beta_.dot(x.query()));
        const Eigen::VectorXd c = x.keys() * x.query();
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
          s += (form_ == SeriesForm::kKey) ? series(bk(i)) : series(c(i)) * detail::ipow(bk(i), key_degree_);
        }
        return s / n;
      }
    }
    throw InvalidConfig("unknown target kind");
  }

  /// Target description as the key/value pairs of a config [target] block.
  [[nodiscard]] std::map<std::string, std::string> to_block() const {
    if (!beta_seed_) throw Unsupported("only seed-defined targets can be written to a config block");
    std::map<std::string, std::string> b;
    b["d"] = std::to_string(dim());
    b["beta_seed"] = std::to_string(*beta_seed_);
    switch (kind_) {
      case TargetKind::kF1: b["kind"] = "f1"; b["p"] = std::to_string(degree_); break;
      case TargetKind::kF2: b["kind"] = "f2"; b["q"] = std::to_string(degree_); break;
      case TargetKind::kF3: b["kind"] = "f3"; b["p"] = std::to_string(degree_); break;
      case TargetKind::kF4:
        b["kind"] = "f4";
        b["gamma"] = format_double(gamma_);
        b["z_seed"] = std::to_string(*z_seed_);
        break;
      case TargetKind::kCustom:
        if (eta_) {
          b["kind"] = "arctan";
          b["eta"] = format_double(*eta_);
          b["terms"] = std::to_string(arctan_terms_);
        } else {
          b["kind"] = "custom";
          b["form"] = std::string(detail::form_name(form_));
          b["coeffs"] = join_doubles(coeffs_);
          if (form_ == SeriesForm::kCorrelation) b["key_degree"] = std::to_string(key_degree_);
        }
        break;
    }
    return b;
  }

  /// Inverse of to_block. `d` may be omitted from the block when supplied as `default_dim`.
  static TargetSpec from_block(const std::map<std::string, std::string>& block, int default_dim = 0) {
    auto get = [&](const char* key) -> std::optional<std::string> {
      auto it = block.find(key);
      if (it == block.end()) return std::nullopt;
      return it->second;
    };
    auto need = [&](const char* key) -> std::string {
      auto v = get(key);
      if (!v) throw InvalidConfig(std::string("target block is missing '") + key + "'");
      return *v;
    };
    const std::string kind = need("kind");
    std::vector<std::string> allowed = {"kind", "d", "beta_seed"};
    if (kind == "f1" || kind == "f3") allowed.push_back("p");
    else if (kind == "f2") allowed.push_back("q");
    else if (kind == "f4") allowed.insert(allowed.end(), {"gamma", "z_seed"});
    else if (kind == "arctan") allowed.insert(allowed.end(), {"eta", "terms"});
    else if (kind == "custom") allowed.insert(allowed.end(), {"form", "coeffs", "key_degree"});
    else throw InvalidConfig("unknown target kind '" + kind + "' (expected f1, f2, f3, f4, arctan or custom)");
    for (const auto& [key, value] : block) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw InvalidConfig("unknown key '" + key + "' in target block of kind " + kind);
      }
    }
    const int d = get("d") ? parse_int<int>(*get("d"), "target d") : default_dim;
    if (d < 1) throw InvalidDimension("target dimension must be >= 1");
    const auto beta_seed = get("beta_seed") ? parse_int<std::uint64_t>(*get("beta_seed"), "beta_seed") : 0;
    if (kind == "f1") return f1(d, parse_int<int>(need("p"), "p"), beta_seed);
    if (kind == "f2") return f2(d, parse_int<int>(need("q"), "q"), beta_seed);
    if (kind == "f3") return f3(d, parse_int<int>(need("p"), "p"), beta_seed);
    if (kind == "f4") {
      const auto z_seed = get("z_seed") ? parse_int<std::uint64_t>(*get("z_seed"), "z_seed") : 1;
      return f4(d, parse_double(need("gamma"), "gamma"), beta_seed, z_seed);
    }
    if (kind == "arctan") {
      const double eta = get("eta") ? parse_double(*get("eta"), "eta") : 3.0;
      const int terms = get("terms") ? parse_int<int>(*get("terms"), "terms") : 20;
      return arctan_preset(d, eta, beta_seed, terms);
    }
    const std::string form = need("form");
    SeriesForm f;
    if (form == "key") f = SeriesForm::kKey;
    else if (form == "query") f = SeriesForm::kQuery;
    else if (form == "correlation") f = SeriesForm::kCorrelation;
    else throw InvalidConfig("unknown series form '" + form + "'");
    const int s = get("key_degree") ? parse_int<int>(*get("key_degree"), "key_degree") : 0;
    return custom_seeded(d, f, parse_double_list(need("coeffs"), "coeffs"), beta_seed, s);
  }

 private:
  TargetSpec() = default;

  static int check_degree(int p) {
    if (p < 0) throw InvalidConfig("target degree must be >= 0");
    return p;
  }

  static Eigen::VectorXd beta_from_seed(int d, std::uint64_t seed) {
    RngStream s = RngStream(seed).derive(StreamTag::kTarget, 0);
    return sample_sphere(s, d);
  }

  static TargetSpec seeded(TargetKind kind, int d, int degree, std::uint64_t beta_seed) {
    TargetSpec t;
    t.kind_ = kind;
    t.degree_ = check_degree(degree);
    t.beta_ = beta_from_seed(d, beta_seed);
    t.beta_seed_ = beta_seed;
    return t;
  }

  void set_beta(Eigen::VectorXd beta) {
    if (beta.size() == 0) throw InvalidDimension("beta must be non-empty");
    if (std::abs(beta.norm() - 1.0) > 1e-10) throw DomainError("beta must be a unit vector");
    beta_ = std::move(beta);
  }

  [[nodiscard]] double series(double z) const {
    double s = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > 0;) s = s * z + coeffs_[k];
    return s;
  }

  TargetKind kind_ = TargetKind::kF1;
  int degree_ = 0;
  double gamma_ = 0.0;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd s_;
  SeriesForm form_ = SeriesForm::kKey;
  std::vector<double> coeffs_;
  int key_degree_ = 0;
  std::optional<std::uint64_t> beta_seed_;
  std::optional<std::uint64_t> z_seed_;
  std::optional<double> eta_;
  int arctan_terms_ = 0;
};

// ---------------------------------------------------------------------------
// Complexity measures. Each is evaluated on the canonical polynomial
// representation of the target, so it is an upper bound on the infimum over
// representations.

/// C_k = max(k^4.5 4^k, 1).
inline double rfa_constant(int k) {
  if (k < 0) throw DomainError("degree must be >= 0");
  return std::max(std::pow(static_cast<double>(k), 4.5) * std::pow(4.0, k), 1.0);
}

/// C~_k = max(k^3.5, 1) ((N+2)/2)^{2k}, indexed by total degree in vec(x).
inline double rfmlp_constant(int k, int keys) {
  if (k < 0) throw DomainError("degree must be >= 0");
  if (keys < 1) throw InvalidDimension("number of keys must be >= 1");
  return std::max(std::pow(static_cast<double>(k), 3.5), 1.0) * std::pow(0.5 * (keys + 2), 2 * k);
}

/// B(f*) = sum_k C_k sum_{max(r,s)=k} ||f_rs||_Fr^2.
inline double complexity_rfa(const TargetSpec& t) {
  const int d = t.dim();
  switch (t.kind()) {
    case TargetKind::kF1:
    case TargetKind::kF3: return rfa_constant(t.degree());
    case TargetKind::kF2: return rfa_constant(t.degree() + 1) * std::pow(static_cast<double>(d), t.degree());
    case TargetKind::kF4: return rfa_constant(4) * std::pow(t.matrix().norm(), 6);
    case TargetKind::kCustom: {
      double b = 0.0;
      const auto& a = t.coeffs();
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] == 0.0) continue;
        const int kk = static_cast<int>(k);
        if (t.form() == SeriesForm::kCorrelation) {
          b += rfa_constant(kk + t.key_degree()) * a[k] * a[k] * std::pow(static_cast<double>(d), kk);
        } else {
          b += rfa_constant(kk) * a[k] * a[k];
        }
      }
      return b;
    }
  }
  throw Unsupported("target has no closed-form complexity");
}

/// B_MLP(f*) with the constants C~_k over the flattened input.
inline double complexity_rfmlp(const TargetSpec& t, int keys) {
  const int d = t.dim();
  switch (t.kind()) {
    case TargetKind::kF1:
    case TargetKind::kF3: return rfmlp_constant(t.degree(), keys);
    case TargetKind::kF2:
      return rfmlp_constant(2 * t.degree() + 1, keys) * std::pow(static_cast<double>(d), t.degree());
    case TargetKind::kF4: return rfmlp_constant(7, keys) * std::pow(t.matrix().norm(), 6);
    case TargetKind::kCustom: {
      double b = 0.0;
      const auto& a = t.coeffs();
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] == 0.0) continue;
        const int kk = static_cast<int>(k);
        if (t.form() == SeriesForm::kCorrelation) {
          b += rfmlp_constant(2 * kk + t.key_degree(), keys) * a[k] * a[k] * std::pow(static_cast<double>(d), kk);
        } else {
          b += rfmlp_constant(kk, keys) * a[k] * a[k];
        }
      }
      return b;
    }
  }
  throw Unsupported("target has no closed-form complexity");
}

struct BrfaComplexity {
  double b = 0.0;        ///< B(g*, L)
  double epsilon = 0.0;  ///< epsilon_L
};

/// epsilon_L = 1 / (2^{L+1} (L+1)!).
inline double brfa_epsilon(int L) {
  if (L < 1) throw DomainError("L must be >= 1");
  double f = 1.0;
  for (int k = 2; k <= L + 1; ++k) f *= k;
  return 1.0 / (std::ldexp(1.0, L + 1) * f);
}

/// C_k(L) = (2L + k)^{(k+3)/2} 8^{L + k/2}.
inline double brfa_constant(int k, int L) {
  if (k < 0) throw DomainError("degree must be >= 0");
  if (L < 1) throw DomainError("L must be >= 1");
  return std::pow(2.0 * L + k, 0.5 * (k + 3)) * std::pow(8.0, L + 0.5 * k);
}

/// B(g*, L) = ||A||_Fr^2 (sum_k |a_k| C_k(L))^2 for g = (1/N) sum_i F(<x0, x_i>) G(x0, x_i),
/// F(t) = sum_k a_k t^k and G a polynomial with coefficient tensor A.
inline BrfaComplexity complexity_brfa(const std::vector<double>& a, double a_norm, int L) {
  if (!(a_norm >= 0.0)) throw DomainError("||A|| must be >= 0");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k]) * brfa_constant(static_cast<int>(k), L);
  return {a_norm * a_norm * s * s, brfa_epsilon(L)};
}

/// Catalog targets in the correlation-times-polynomial form. Supported: F2;
/// F1 with p <= 3; F3 with p <= 2; F4 with S a multiple of the identity;
/// custom key (degree <= 3), query (degree <= 2) and correlation series
/// (key_degree <= 3).
inline BrfaComplexity complexity_brfa(const TargetSpec& t, int L) {
  auto unit_poly = [&](const std::vector<double>& g) {
    double sq = 0.0;
    for (double c : g) sq += c * c;
    return complexity_brfa(std::vector<double>{1.0}, std::sqrt(sq), L);
  };
  switch (t.kind()) {
    case TargetKind::kF1:
      if (t.degree() > 3) throw Unsupported("BRFA complexity covers F1 with p <= 3");
      return complexity_brfa({1.0}, 1.0, L);
    case TargetKind::kF3:
      if (t.degree() > 2) throw Unsupported("BRFA complexity covers F3 with p <= 2");
      return complexity_brfa({1.0}, 1.0, L);
    case TargetKind::kF2: {
      std::vector<double> a(static_cast<std::size_t>(t.degree()) + 1, 0.0);
      a.back() = 1.0;
      return complexity_brfa(a, 1.0, L);
    }
    case TargetKind::kF4: {
      const Eigen::MatrixXd& s = t.matrix();
      const double c = s(0, 0);
      const Eigen::MatrixXd scaled = c * Eigen::MatrixXd::Identity(s.rows(), s.cols());
      if (s != scaled) throw Unsupported("BRFA complexity covers F4 only when S is a multiple of the identity");
      return complexity_brfa({0.0, 0.0, 0.0, c * c * c}, 1.0, L);
    }
    case TargetKind::kCustom:
      switch (t.form()) {
        case SeriesForm::kKey:
          if (t.degree() > 3) throw Unsupported("BRFA complexity covers key series of degree <= 3");
          return unit_poly(t.coeffs());
        case SeriesForm::kQuery:
          if (t.degree() > 2) throw Unsupported("BRFA complexity covers query series of degree <= 2");
          return unit_poly(t.coeffs());
        case SeriesForm::kCorrelation:
          if (t.key_degree() > 3) throw Unsupported("BRFA complexity covers key_degree <= 3");
          return complexity_brfa(t.coeffs(), 1.0, L);
      }
  }
  throw Unsupported("target is not of correlation-times-polynomial form");
}

}  // namespace rfattn

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/features.hpp"
#include "rfattn/geometry.hpp"
#include "rfattn/linalg.hpp"
#include "rfattn/parallel.hpp"

namespace rfattn {

struct Standardized {
  Eigen::VectorXd values;
  double mean = 0.0;
  double std = 1.0;

  /// Applies the same affine map to other labels (e.g. a test set).
  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& y) const {
    return (y.array() - mean) / std;
  }
};

/// (y - mean) / std with the population standard deviation.
inline Standardized standardize(const Eigen::VectorXd& y) {
  if (y.size() < 2) throw DegenerateLabels("standardization needs at least 2 labels");
  if (!y.allFinite()) throw DegenerateLabels("labels contain non-finite values");
  Standardized out;
  out.mean = y.mean();
  out.std = std::sqrt((y.array() - out.mean).square().mean());
  if (!(out.std > 1e-12)) throw DegenerateLabels("labels have (near) zero variance");
  out.values = out.apply(y);
  return out;
}

struct Dataset {
  std::vector<TokenSequence> inputs;
  Eigen::VectorXd labels;
  std::optional<Standardized> standardization;

  [[nodiscard]] std::size_t size() const noexcept { return inputs.size(); }
};

inline double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  if (pred.size() != y.size()) {
    throw ShapeError("prediction length " + std::to_string(pred.size()) + " != label length " + std::to_string(y.size()));
  }
  if (y.size() == 0) throw ShapeError("mse of empty vectors");
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

enum class RidgeMethod { kAuto, kPrimal, kDual };

namespace detail {

inline void check_ridge_inputs(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double lambda) {
  if (phi.rows() != y.size()) throw ShapeError("feature rows != label count");
  if (phi.rows() == 0 || phi.cols() == 0) throw ShapeError("empty design matrix");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidConfig("lambda must be finite and >= 0");
}

// Solves (K + shift I) x = rhs. With shift = 0 no jitter is applied and a
// numerically singular K is reported.
inline Eigen::VectorXd ridge_system(const Eigen::MatrixXd& k, const Eigen::VectorXd& rhs, double shift) {
  if (shift > 0.0) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += shift;
    return solve_spd(a, rhs);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) {
    throw NumericalError("normal equations are singular at lambda = 0 (reciprocal condition " +
                         std::to_string(llt.info() == Eigen::Success ? llt.rcond() : 0.0) + "); use lambda > 0");
  }
  Eigen::VectorXd x = llt.solve(rhs);
  if (!x.allFinite()) throw NumericalError("non-finite ridge solution at lambda = 0; use lambda > 0");
  return x;
}

}  // namespace detail

/// Precomputed pieces of a ridge problem, reused across a lambda grid.
class RidgeProblem {
 public:
  RidgeProblem(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, RidgeMethod method = RidgeMethod::kAuto)
      : phi_(phi), y_(y) {
    detail::check_ridge_inputs(phi, y, 0.0);
    dual_ = method == RidgeMethod::kDual || (method == RidgeMethod::kAuto && phi.cols() > phi.rows());
    if (dual_) {
      gram_ = phi * phi.transpose();
    } else {
      gram_ = phi.transpose() * phi;
      rhs_ = phi.transpose() * y;
    }
  }

  [[nodiscard]] bool dual() const noexcept { return dual_; }

  /// argmin_v (1/n) ||phi v - y||^2 + lambda ||v||^2.
  [[nodiscard]] Eigen::VectorXd solve(double lambda) const {
    detail::check_ridge_inputs(phi_, y_, lambda);
    const double shift = static_cast<double>(phi_.rows()) * lambda;
    if (dual_) return phi_.transpose() * detail::ridge_system(gram_, y_, shift);
    return detail::ridge_system(gram_, rhs_, shift);
  }

 private:
  const Eigen::MatrixXd& phi_;
  const Eigen::VectorXd& y_;
  bool dual_ = false;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
};

/// v = (phi^T phi + n lambda I)^{-1} phi^T y, solved in the dual when D > n.
inline Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double lambda,
                                 RidgeMethod method = RidgeMethod::kAuto) {
  return RidgeProblem(phi, y, method).solve(lambda);
}

inline Eigen::VectorXd ridge_fit(const FeatureMatrix& features, const Eigen::VectorXd& y, double lambda,
                                 RidgeMethod method = RidgeMethod::kAuto) {
  return ridge_fit(features.data, y, lambda, method);
}

struct FitResult {
  Eigen::VectorXd coeffs;
  double lambda = 0.0;
  double train_error = 0.0;
  double test_error = 0.0;
  double k1_hat = 0.0;
  double k2_hat = 0.0;
  int failed_points = 0;
};

/// 16 log-spaced values in [1e-8, 1e2] followed by 0.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i < 16; ++i) g.push_back(std::pow(10.0, -8.0 + 10.0 * i / 15.0));
  g.push_back(0.0);
  return g;
}

/// Fits every grid value and keeps the one with the smallest test error
/// (ties go to the larger lambda). Grid points whose solve fails are skipped.
inline FitResult select_lambda(const FeatureMatrix& train, const Eigen::VectorXd& y_train, const FeatureMatrix& test,
                               const Eigen::VectorXd& y_test, const std::vector<double>& grid, unsigned threads = 1) {
  if (grid.empty()) throw InvalidConfig("lambda grid is empty");
  if (train.cols() != test.cols()) throw ShapeError("train and test feature dimensions differ");
  if (test.rows() != y_test.size()) throw ShapeError("test feature rows != test label count");
  const RidgeProblem problem(train.data, y_train);

  struct Point {
    bool ok = false;
    Eigen::VectorXd v;
    double train_error = 0.0;
    double test_error = 0.0;
  };
  std::vector<Point> points(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    try {
      Point p;
      p.v = problem.solve(grid[i]);
      p.train_error = mse(train.data * p.v, y_train);
      p.test_error = mse(test.data * p.v, y_test);
      p.ok = std::isfinite(p.test_error) && std::isfinite(p.train_error);
      points[i] = std::move(p);
    } catch (const NumericalError&) {
      points[i].ok = false;
    }
  });

  std::optional<std::size_t> best;
  int failed = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!points[i].ok) {
      ++failed;
      continue;
    }
    if (!best || points[i].test_error < points[*best].test_error ||
        (points[i].test_error == points[*best].test_error && grid[i] > grid[*best])) {
      best = i;
    }
  }
  if (!best) throw NumericalError("ridge solve failed for every lambda in the grid");

  FitResult out;
  out.lambda = grid[*best];
  out.coeffs = std::move(points[*best].v);
  out.train_error = points[*best].train_error;
  out.test_error = points[*best].test_error;
  out.failed_points = failed;
  // A bare design matrix without head structure is treated as one head per column.
  const bool structured = train.heads > 0 && train.heads * train.block == train.cols();
  const auto norms = structured ? coeff_norms(out.coeffs, train.kind, train.heads,
                                              is_attention(train.kind) ? train.block - 1 : 1)
                                : coeff_norms(out.coeffs, ModelKind::kRFMLP, static_cast<int>(train.cols()), 1);
  out.k1_hat = norms.k1;
  out.k2_hat = norms.k2;
  return out;
}

}  // namespace rfattn

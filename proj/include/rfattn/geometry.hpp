#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/rng.hpp"

namespace rfattn {

inline constexpr double kUnitNormTolerance = 1e-12;

/// One input instance: a query token x0 and N key tokens (rows of `keys`),
/// all of unit Euclidean norm.
class TokenSequence {
 public:
  TokenSequence(Eigen::VectorXd x0, Eigen::MatrixXd keys) : x0_(std::move(x0)), keys_(std::move(keys)) {
    if (x0_.size() == 0) throw InvalidDimension("token dimension must be positive");
    if (keys_.rows() == 0) throw InvalidDimension("sequence must contain at least one key");
    if (keys_.cols() != x0_.size()) {
      throw ShapeError("key dimension " + std::to_string(keys_.cols()) + " != query dimension " +
                       std::to_string(x0_.size()));
    }
    if (std::abs(x0_.norm() - 1.0) > kUnitNormTolerance) throw DomainError("query token is not unit norm");
    for (Eigen::Index i = 0; i < keys_.rows(); ++i) {
      if (std::abs(keys_.row(i).norm() - 1.0) > kUnitNormTolerance) {
        throw DomainError("key token " + std::to_string(i + 1) + " is not unit norm");
      }
    }
  }

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(x0_.size()); }
  [[nodiscard]] int length() const noexcept { return static_cast<int>(keys_.rows()); }

  [[nodiscard]] const Eigen::VectorXd& query() const noexcept { return x0_; }
  [[nodiscard]] const Eigen::MatrixXd& keys() const noexcept { return keys_; }
  [[nodiscard]] Eigen::VectorXd key(int i) const { return keys_.row(i).transpose(); }

  /// [x0; 1]
  [[nodiscard]] Eigen::VectorXd augmented_query() const {
    Eigen::VectorXd out(dim() + 1);
    out << x0_, 1.0;
    return out;
  }

  /// (d+1) x N matrix whose column i is [x_i; 1].
  [[nodiscard]] Eigen::MatrixXd augmented_keys() const {
    Eigen::MatrixXd out(dim() + 1, length());
    out.topRows(dim()) = keys_.transpose();
    out.row(dim()).setOnes();
    return out;
  }

  /// vec(x_{0:N}) = [x0; x1; ...; xN; 1], length d(N+1)+1.
  [[nodiscard]] Eigen::VectorXd flattened() const {
    const int d = dim();
    Eigen::VectorXd out(d * (length() + 1) + 1);
    out.head(d) = x0_;
    for (int i = 0; i < length(); ++i) out.segment(d * (i + 1), d) = keys_.row(i).transpose();
    out(out.size() - 1) = 1.0;
    return out;
  }

  /// Copy with keys reordered so that new key i is old key perm[i].
  [[nodiscard]] TokenSequence permuted(std::span<const int> perm) const {
    if (static_cast<int>(perm.size()) != length()) throw ShapeError("permutation length mismatch");
    Eigen::MatrixXd k(keys_.rows(), keys_.cols());
    for (int i = 0; i < length(); ++i) k.row(i) = keys_.row(perm[i]);
    return TokenSequence(x0_, std::move(k));
  }

 private:
  Eigen::VectorXd x0_;
  Eigen::MatrixXd keys_;
};

/// Uniform draw from S^{d-1}: a Gaussian vector normalized to unit length.
inline Eigen::VectorXd sample_sphere(RngStream& stream, int d) {
  if (d < 1) throw InvalidDimension("sphere dimension must be >= 1, got " + std::to_string(d));
  Eigen::VectorXd g(d);
  double norm = 0.0;
  do {
    for (int j = 0; j < d; ++j) g(j) = stream.normal();
    norm = g.norm();
  } while (norm < 1e-30);
  return g / norm;
}

inline TokenSequence sample_sequence(RngStream& stream, int d, int n_keys) {
  if (n_keys < 1) throw InvalidDimension("number of keys must be >= 1, got " + std::to_string(n_keys));
  Eigen::VectorXd x0 = sample_sphere(stream, d);
  Eigen::MatrixXd keys(n_keys, d);
  for (int i = 0; i < n_keys; ++i) keys.row(i) = sample_sphere(stream, d).transpose();
  return TokenSequence(std::move(x0), std::move(keys));
}

/// `count` independent sequences drawn in order from `stream`.
inline std::vector<TokenSequence> sample_batch(RngStream& stream, int count, int d, int n_keys) {
  std::vector<TokenSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) out.push_back(sample_sequence(stream, d, n_keys));
  return out;
}

}  // namespace rfattn

#pragma once

// Finite-width random feature maps for random-feature attention (RFA), biased
// random-feature attention (BRFA) and the random-feature MLP baseline (RFMLP).
// Every model is linear in its trainable coefficients, so a model is fully
// described by its frozen weights plus the n x D design matrix they induce.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/geometry.hpp"
#include "rfattn/parallel.hpp"
#include "rfattn/rng.hpp"

namespace rfattn {

enum class ModelKind { kRFA, kBRFA, kRFMLP };

inline std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::kRFA: return "RFA";
    case ModelKind::kBRFA: return "BRFA";
    case ModelKind::kRFMLP: return "RFMLP";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "rfa") return ModelKind::kRFA;
  if (lower == "brfa") return ModelKind::kBRFA;
  if (lower == "rfmlp") return ModelKind::kRFMLP;
  throw InvalidConfig("unknown model kind '" + std::string(text) + "' (expected rfa, brfa or rfmlp)");
}

inline bool is_attention(ModelKind kind) noexcept { return kind != ModelKind::kRFMLP; }

/// Frozen random weights of an M-head model.
///
/// Attention models keep W_1..W_M side by side in a (d+1) x M(d+1) matrix
/// (head m occupies columns [m(d+1), (m+1)(d+1))). RFMLP keeps w_1..w_M as
/// the rows of an M x (d(N+1)+1) matrix. BRFA additionally carries the bias
/// W0 = bias_scale * [I_d, 0; 0, 0].
class HeadWeights {
 public:
  HeadWeights(ModelKind kind, int dim, int keys, Eigen::MatrixXd weights, double bias_scale = 0.0)
      : kind_(kind), dim_(dim), keys_(keys), bias_scale_(bias_scale), weights_(std::move(weights)) {
    if (dim < 1) throw InvalidDimension("token dimension must be >= 1");
    if (keys < 1) throw InvalidDimension("number of keys must be >= 1");
    if (bias_scale < 0.0 || !std::isfinite(bias_scale)) throw InvalidConfig("bias scale must be finite and >= 0");
    if (bias_scale != 0.0 && kind != ModelKind::kBRFA) {
      throw InvalidConfig("a non-zero bias scale is only meaningful for BRFA");
    }
    if (is_attention(kind)) {
      const int b = dim + 1;
      if (weights_.rows() != b || weights_.cols() == 0 || weights_.cols() % b != 0) {
        throw ShapeError("attention weights must be (d+1) x M(d+1)");
      }
      heads_ = static_cast<int>(weights_.cols() / b);
    } else {
      if (weights_.cols() != dim * (keys + 1) + 1 || weights_.rows() == 0) {
        throw ShapeError("RFMLP weights must be M x (d(N+1)+1)");
      }
      heads_ = static_cast<int>(weights_.rows());
    }
    if (kind == ModelKind::kBRFA) {
      Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(dim + 1, dim + 1);
      w0.topLeftCorner(dim, dim).diagonal().setConstant(bias_scale);
      bias_ = std::move(w0);
    }
  }

  [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
  [[nodiscard]] int heads() const noexcept { return heads_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] int keys() const noexcept { return keys_; }
  [[nodiscard]] double bias_scale() const noexcept { return bias_scale_; }
  [[nodiscard]] const std::optional<Eigen::MatrixXd>& bias() const noexcept { return bias_; }
  [[nodiscard]] const Eigen::MatrixXd& raw() const noexcept { return weights_; }

  /// Coefficients per head: d+1 for attention models, 1 for RFMLP.
  [[nodiscard]] int block_size() const noexcept { return is_attention(kind_) ? dim_ + 1 : 1; }
  [[nodiscard]] int feature_dim() const noexcept { return heads_ * block_size(); }

  /// W_m for attention models.
  [[nodiscard]] Eigen::MatrixXd head_matrix(int m) const {
    if (!is_attention(kind_)) throw ShapeError("RFMLP heads are vectors");
    return weights_.middleCols(static_cast<Eigen::Index>(m) * (dim_ + 1), dim_ + 1);
  }

  /// w_m for RFMLP.
  [[nodiscard]] Eigen::VectorXd head_vector(int m) const {
    if (is_attention(kind_)) throw ShapeError("attention heads are matrices");
    return weights_.row(m).transpose();
  }

 private:
  ModelKind kind_;
  int dim_;
  int keys_;
  int heads_ = 0;
  double bias_scale_;
  Eigen::MatrixXd weights_;
  std::optional<Eigen::MatrixXd> bias_;
};

/// n x D design matrix. For attention models columns are head-major blocks of
/// d+1: block m of row j is (1/N) sum_i relu(<W_m (+W0), x0 xi^T>) [xi; 1].
struct FeatureMatrix {
  Eigen::MatrixXd data;
  ModelKind kind = ModelKind::kRFA;
  int heads = 0;
  int block = 1;

  [[nodiscard]] Eigen::Index rows() const noexcept { return data.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return data.cols(); }
};

/// Draws M heads. Attention entries are N(0, 1/4) so that <W, x0~ xi~^T> has
/// unit variance for unit tokens; RFMLP entries are N(0, 1/(N+2)) so that
/// <w, vec(x)> has unit variance.
inline HeadWeights sample_weights(RngStream& stream, ModelKind kind, int heads, int dim, int keys,
                                  double bias_scale = 0.0) {
  if (heads < 1) throw InvalidConfig("number of heads must be >= 1");
  if (dim < 1) throw InvalidDimension("token dimension must be >= 1");
  if (keys < 1) throw InvalidDimension("number of keys must be >= 1");
  if (bias_scale != 0.0 && kind != ModelKind::kBRFA) {
    throw InvalidConfig("bias_scale != 0 requires model BRFA");
  }
  if (is_attention(kind)) {
    const int b = dim + 1;
    Eigen::MatrixXd w(b, static_cast<Eigen::Index>(heads) * b);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (int r = 0; r < b; ++r) w(r, c) = 0.5 * stream.normal();
    }
    return HeadWeights(kind, dim, keys, std::move(w), bias_scale);
  }
  const int width = dim * (keys + 1) + 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(keys + 2));
  Eigen::MatrixXd w(heads, width);
  for (int m = 0; m < heads; ++m) {
    for (int c = 0; c < width; ++c) w(m, c) = scale * stream.normal();
  }
  return HeadWeights(kind, dim, keys, std::move(w), 0.0);
}

namespace detail {

inline void check_sequence(const HeadWeights& weights, const TokenSequence& x) {
  if (x.dim() != weights.dim()) {
    throw ShapeError("sequence dimension " + std::to_string(x.dim()) + " != weights dimension " +
                     std::to_string(weights.dim()));
  }
  // Attention features are defined for any number of keys; RFMLP is not.
  if (!is_attention(weights.kind()) && x.length() != weights.keys()) {
    throw ShapeError("RFMLP weights expect " + std::to_string(weights.keys()) + " keys, got " +
                     std::to_string(x.length()));
  }
}

/// Attention features of one sequence as a (d+1) x M matrix (column m = head m block).
inline Eigen::MatrixXd attention_blocks(const HeadWeights& weights, const TokenSequence& x) {
  const int b = weights.dim() + 1;
  const Eigen::VectorXd q = x.augmented_query();
  const Eigen::MatrixXd k = x.augmented_keys();  // (d+1) x N
  // Column m of `proj` is W_m^T x0~.
  const Eigen::VectorXd stacked = weights.raw().transpose() * q;
  const Eigen::Map<const Eigen::MatrixXd> proj(stacked.data(), b, weights.heads());
  Eigen::MatrixXd scores = proj.transpose() * k;  // M x N
  if (weights.bias()) {
    const Eigen::RowVectorXd h = q.transpose() * (*weights.bias()) * k;
    scores.rowwise() += h;
  }
  scores = scores.cwiseMax(0.0);
  return (k * scores.transpose()) / static_cast<double>(x.length());
}

inline Eigen::VectorXd feature_row(const HeadWeights& weights, const TokenSequence& x) {
  check_sequence(weights, x);
  if (is_attention(weights.kind())) {
    Eigen::MatrixXd blocks = attention_blocks(weights, x);
    return Eigen::Map<const Eigen::VectorXd>(blocks.data(), blocks.size());
  }
  return (weights.raw() * x.flattened()).cwiseMax(0.0);
}

}  // namespace detail

/// Design matrix of `batch` under `weights`; rows may be computed concurrently.
inline FeatureMatrix featurize(const HeadWeights& weights, std::span<const TokenSequence> batch,
                               unsigned threads = 1) {
  if (batch.empty()) throw ShapeError("featurize needs a non-empty batch");
  FeatureMatrix out;
  out.kind = weights.kind();
  out.heads = weights.heads();
  out.block = weights.block_size();
  out.data.resize(static_cast<Eigen::Index>(batch.size()), weights.feature_dim());
  parallel_for(batch.size(), threads, [&](std::size_t j) {
    out.data.row(static_cast<Eigen::Index>(j)) = detail::feature_row(weights, batch[j]).transpose();
  });
  return out;
}

inline Eigen::VectorXd predict(const FeatureMatrix& features, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != features.cols()) {
    throw ShapeError("coefficient length " + std::to_string(coeffs.size()) + " != feature dimension " +
                     std::to_string(features.cols()));
  }
  return features.data * coeffs;
}

struct CoeffNorms {
  double k1 = 0.0;  ///< sum_m ||v_m||
  double k2 = 0.0;  ///< M * sum_m ||v_m||^2, comparable to K2 of the constraint set
};

inline CoeffNorms coeff_norms(const Eigen::VectorXd& coeffs, ModelKind kind, int heads, int dim) {
  const int b = is_attention(kind) ? dim + 1 : 1;
  if (heads < 1 || coeffs.size() != static_cast<Eigen::Index>(heads) * b) {
    throw ShapeError("coefficient length does not match M heads of size " + std::to_string(b));
  }
  CoeffNorms out;
  for (int m = 0; m < heads; ++m) {
    const double sq = coeffs.segment(static_cast<Eigen::Index>(m) * b, b).squaredNorm();
    out.k1 += std::sqrt(sq);
    out.k2 += sq;
  }
  out.k2 *= heads;
  return out;
}

}  // namespace rfattn

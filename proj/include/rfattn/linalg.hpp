#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>

#include "rfattn/errors.hpp"

namespace rfattn {

/// Solves A x = B for symmetric positive (semi)definite A with a Cholesky
/// factorization. If the factorization fails, a diagonal jitter of
/// 1e-12, 1e-11, ..., 1e-8 times the mean diagonal is tried in turn. Returns
/// the jitter actually used through `jitter_used` when non-null.
inline Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double* jitter_used = nullptr,
                                 const char* hint = nullptr) {
  if (a.rows() != a.cols()) throw ShapeError("system matrix must be square");
  if (a.rows() != b.rows()) throw ShapeError("right-hand side row count does not match system");
  if (!a.allFinite() || !b.allFinite()) throw NumericalError("non-finite entries in linear system");

  const double scale = a.rows() > 0 ? std::abs(a.diagonal().mean()) : 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    if (attempt > 0) jitter = std::pow(10.0, -13 + attempt) * (scale > 0.0 ? scale : 1.0);
    if (jitter == 0.0) {
      llt.compute(a);
    } else {
      Eigen::MatrixXd shifted = a;
      shifted.diagonal().array() += jitter;
      llt.compute(shifted);
    }
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd x = llt.solve(b);
      if (x.allFinite()) {
        if (jitter_used) *jitter_used = jitter;
        return x;
      }
    }
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "Cholesky factorization failed after jitter up to 1e-8 (n = " << a.rows();
  if (eig.info() == Eigen::Success && a.rows() > 0) {
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    msg << ", eigenvalues in [" << lo << ", " << hi << "]";
    if (lo > 0.0) msg << ", condition number " << hi / lo;
  }
  msg << ")";
  if (hint) msg << "; " << hint;
  throw NumericalError(msg.str());
}

}  // namespace rfattn

#pragma once

// Dense symmetric positive-definite substrate: SPD matrices with a Cholesky
// factor, the inverse-factor used by the randomized update, quadratic forms
// and trace-of-solve.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sharpbfgs/errors.hpp"

namespace sharpbfgs {

/// Relative pivot floor below which a factorization is declared indefinite.
inline constexpr double kPivotTolerance = 1e-14;

/// Symmetric positive-definite matrix. Immutable; symmetrized and factored at
/// construction, so a live SpdMatrix always carries a valid Cholesky factor.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
      throw Error(ErrorCode::DimensionMismatch, "SpdMatrix needs a non-empty square matrix");
    }
    entries_ = 0.5 * (entries_ + entries_.transpose()).eval();
    if (!entries_.allFinite()) {
      throw Error(ErrorCode::NotPositiveDefinite, "non-finite entries");
    }
    llt_.compute(entries_);
    const double max_diag = entries_.diagonal().cwiseAbs().maxCoeff();
    if (llt_.info() != Eigen::Success) {
      throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
    }
    const auto l_diag = llt_.matrixLLT().diagonal();
    for (Index i = 0; i < l_diag.size(); ++i) {
      const double pivot = l_diag(i) * l_diag(i);
      if (!(pivot > kPivotTolerance * max_diag)) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    "pivot " + std::to_string(i) + " below tolerance");
      }
    }
  }

  static SpdMatrix identity(Index d) { return SpdMatrix(Matrix::Identity(d, d)); }
  static SpdMatrix diagonal(const Vector& diag) { return SpdMatrix(Matrix(diag.asDiagonal())); }

  Index dim() const noexcept { return entries_.rows(); }
  const Matrix& entries() const noexcept { return entries_; }
  const Eigen::LLT<Matrix>& llt() const noexcept { return llt_; }

  /// Lower-triangular factor L with entries = L L^T.
  Matrix lower_factor() const { return llt_.matrixL(); }

  Vector solve(const Vector& b) const {
    require_same_dim(dim(), b.size(), "SpdMatrix::solve");
    return llt_.solve(b);
  }

  Matrix solve(const Matrix& b) const {
    require_same_dim(dim(), b.rows(), "SpdMatrix::solve");
    return llt_.solve(b);
  }

  Matrix inverse() const {
    Matrix inv = llt_.solve(Matrix::Identity(dim(), dim()));
    return 0.5 * (inv + inv.transpose());
  }

  double log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

 private:
  Matrix entries_;
  Eigen::LLT<Matrix> llt_;
};

/// Upper-triangular matrix with strictly positive diagonal.
class UpperTriangular {
 public:
  explicit UpperTriangular(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "UpperTriangular needs a square matrix");
    }
    entries_.triangularView<Eigen::StrictlyLower>().setZero();
    for (Index i = 0; i < entries_.rows(); ++i) {
      if (!(entries_(i, i) > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite, "UpperTriangular needs a positive diagonal");
      }
    }
  }

  Index dim() const noexcept { return entries_.rows(); }
  const Matrix& entries() const noexcept { return entries_; }

  /// R^T v.
  Vector apply_transpose(const Vector& v) const {
    require_same_dim(dim(), v.size(), "UpperTriangular::apply_transpose");
    return entries_.triangularView<Eigen::Upper>().transpose() * v;
  }

 private:
  Matrix entries_;
};

/// Returns upper-triangular R with m^{-1} = R^T R.
///
/// Built from the reversed-order factorization m = U U^T (U upper), so that
/// R = U^{-1}. The reversal permutes m, runs an ordinary lower Cholesky and
/// permutes the factor back.
inline UpperTriangular cholesky(const SpdMatrix& m) {
  const Index d = m.dim();
  const Matrix reversed = m.entries().reverse();  // P m P with P the exchange matrix
  const SpdMatrix reversed_spd(reversed);
  const Matrix lower = reversed_spd.lower_factor();
  const Matrix upper = lower.reverse();  // P L P is upper triangular, m = U U^T
  Matrix r = upper.triangularView<Eigen::Upper>().solve(Matrix::Identity(d, d));
  return UpperTriangular(std::move(r));
}

inline Vector solve(const SpdMatrix& m, const Vector& b) { return m.solve(b); }

inline double quad_form(const SpdMatrix& m, const Vector& u) {
  require_same_dim(m.dim(), u.size(), "quad_form");
  return u.dot(m.entries() * u);
}

/// Tr(a^{-1} g), evaluated as Tr(L^{-1} g L^{-T}) with a = L L^T.
inline double trace_solve(const SpdMatrix& a, const Matrix& g) {
  require_same_dim(a.dim(), g.rows(), "trace_solve");
  require_same_dim(g.rows(), g.cols(), "trace_solve");
  const auto lower = a.llt().matrixL();
  const Matrix half = lower.solve(g);                          // L^{-1} g
  const Matrix full = lower.solve(Matrix(half.transpose()));   // L^{-1} g L^{-T}
  return full.diagonal().sum();
}

inline double trace_solve(const SpdMatrix& a, const SpdMatrix& g) {
  return trace_solve(a, g.entries());
}

/// Extreme eigenvalues of the pencil (g, a), i.e. of a^{-1/2} g a^{-1/2}.
/// `lo * a <= g <= hi * a` holds exactly for the returned pair.
struct EigenRange {
  double lo;
  double hi;
};

inline EigenRange generalized_eig_range(const SpdMatrix& g, const SpdMatrix& a) {
  require_same_dim(a.dim(), g.dim(), "generalized_eig_range");
  const auto lower = a.llt().matrixL();
  const Matrix half = lower.solve(g.entries());
  Matrix sym = lower.solve(Matrix(half.transpose()));
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

inline EigenRange eig_range(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

}  // namespace sharpbfgs

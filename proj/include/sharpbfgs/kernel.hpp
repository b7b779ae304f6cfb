#pragma once

// The BFGS operator family acting on a paired (G, H = G^{-1}) state, the
// potentials used to measure approximation quality, and the greedy and
// randomized direction rules.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>

#include "sharpbfgs/errors.hpp"
#include "sharpbfgs/linalg.hpp"

namespace sharpbfgs {

enum class UpdateStatus {
  Applied,
  DegenerateDirection,  // u^T G u or u^T A u numerically zero
  CurvatureSkip,        // s^T y not sufficiently positive
};

/// Hessian approximation G together with its inverse H, kept in sync through
/// rank-two updates. H is refreshed from a factorization of G whenever the
/// drift monitor sees ||G H - I||_F above kRefreshDrift * sqrt(d).
class HessianApproxState {
 public:
  static constexpr double kRefreshDrift = 1e-8;
  static constexpr long kDriftCheckStride = 16;

  explicit HessianApproxState(const Matrix& g) : g_(0.5 * (g + g.transpose())) {
    refresh_inverse();
  }

  static HessianApproxState scaled_identity(Index d, double scale) {
    return HessianApproxState(scale * Matrix::Identity(d, d));
  }

  Index dim() const noexcept { return g_.rows(); }
  const Matrix& g() const noexcept { return g_; }
  const Matrix& h() const noexcept { return h_; }
  long update_count() const noexcept { return update_count_; }
  long refresh_count() const noexcept { return refresh_count_; }

  /// Factored copy of G; throws NotPositiveDefinite if G has lost definiteness.
  SpdMatrix g_spd() const { return SpdMatrix(g_); }

  double inverse_drift() const {
    return (g_ * h_ - Matrix::Identity(dim(), dim())).norm();
  }

  void refresh_inverse() {
    h_ = SpdMatrix(g_).inverse();
    ++refresh_count_;
  }

 private:
  friend UpdateStatus bfgs_update(HessianApproxState&, const Vector&, const Vector&);
  friend void scale_state(HessianApproxState&, double);

  void after_update() {
    ++update_count_;
    if (update_count_ % kDriftCheckStride == 0 &&
        inverse_drift() > kRefreshDrift * std::sqrt(static_cast<double>(dim()))) {
      refresh_inverse();
    }
  }

  Matrix g_;
  Matrix h_;
  long update_count_ = 0;
  long refresh_count_ = -1;  // the constructor's own factorization does not count
};

/// G+ = G - G u u^T G / (u^T G u) + A u u^T A / (u^T A u), with H updated by the
/// matching product form. `au` is A u for the target operator A.
///
/// Every outer product is formed as v v^T (or a sum of swapped pairs) so that
/// G and H stay exactly symmetric.
inline UpdateStatus bfgs_update(HessianApproxState& state, const Vector& au, const Vector& u) {
  require_same_dim(state.dim(), u.size(), "bfgs_update");
  require_same_dim(state.dim(), au.size(), "bfgs_update");
  const double u_sq = u.squaredNorm();
  const Vector gu = state.g_ * u;
  const double ugu = u.dot(gu);
  const double uau = u.dot(au);
  if (!(u_sq > 0.0) || !(ugu > 1e-14 * u_sq) || !(uau > 1e-14 * u_sq)) {
    return UpdateStatus::DegenerateDirection;
  }

  const Vector g_dir = gu / std::sqrt(ugu);
  const Vector a_dir = au / std::sqrt(uau);
  state.g_.noalias() -= g_dir * g_dir.transpose();
  state.g_.noalias() += a_dir * a_dir.transpose();

  const Vector ha = state.h_ * au;
  state.h_ -= (u * ha.transpose() + ha * u.transpose()) / uau;
  const double coef = (1.0 + au.dot(ha) / uau) / uau;
  const Vector z = u * std::sqrt(coef);
  state.h_.noalias() += z * z.transpose();

  state.after_update();
  return UpdateStatus::Applied;
}

/// Classic BFGS in secant form: the update along s towards any operator J with J s = y.
inline UpdateStatus bfgs_update_secant(HessianApproxState& state, const Vector& s, const Vector& y) {
  require_same_dim(state.dim(), s.size(), "bfgs_update_secant");
  require_same_dim(state.dim(), y.size(), "bfgs_update_secant");
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm())) {
    return UpdateStatus::CurvatureSkip;
  }
  return bfgs_update(state, y, s);
}

/// G <- factor G, H <- H / factor.
inline void scale_state(HessianApproxState& state, double factor) {
  if (!(factor >= 1.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::DomainError, "scale factor must be finite and >= 1");
  }
  if (factor == 1.0) {
    return;
  }
  state.g_ *= factor;
  state.h_ /= factor;
}

/// Trace potential Tr(A^{-1} G) - d.
inline double sigma(const SpdMatrix& a, const Matrix& g) {
  return trace_solve(a, g) - static_cast<double>(a.dim());
}

inline double sigma(const SpdMatrix& a, const SpdMatrix& g) { return sigma(a, g.entries()); }

/// Discrepancy of G against A along u, normalized by the G-step length in the
/// A^{-1} norm: sqrt(w^T A^{-1} w / v^T A^{-1} v) with w = (G - A) u, v = G u.
inline double theta(const SpdMatrix& a, const Matrix& g, const Vector& u) {
  require_same_dim(a.dim(), u.size(), "theta");
  const Vector gu = g * u;
  const Vector w = gu - a.entries() * u;
  const double den = gu.dot(a.solve(gu));
  if (!(den > 1e-300)) {
    throw Error(ErrorCode::DegenerateDirection, "theta: denominator vanishes");
  }
  const double num = w.dot(a.solve(w));
  return std::sqrt(std::max(0.0, num) / den);
}

inline double theta(const SpdMatrix& a, const SpdMatrix& g, const Vector& u) {
  return theta(a, g.entries(), u);
}

/// sigma(A, G) - ln Det(A^{-1} G).
inline double psi(const SpdMatrix& a, const SpdMatrix& g) {
  return sigma(a, g) - (g.log_det() - a.log_det());
}

/// t - ln(1 + t), defined for t > -1.
inline double omega(double t) {
  if (!(t > -1.0 + 1e-12)) {
    throw Error(ErrorCode::DomainError, "omega requires t > -1");
  }
  return t - std::log1p(t);
}

/// Access to the target operator restricted to coordinate directions.
struct DirectionQuery {
  Vector a_diag;
  std::function<Vector(Index)> a_column;
};

/// argmax_i g_diag[i] / a_diag[i]; the lowest index wins ties.
inline Index greedy_direction(const DirectionQuery& query, const Vector& g_diag) {
  require_same_dim(query.a_diag.size(), g_diag.size(), "greedy_direction");
  Index best = 0;
  double best_ratio = -1.0;
  for (Index i = 0; i < g_diag.size(); ++i) {
    if (!(query.a_diag(i) > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "greedy_direction: non-positive diagonal entry");
    }
    const double ratio = g_diag(i) / query.a_diag(i);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = i;
    }
  }
  return best;
}

/// One greedy BFGS update of `state` towards the operator behind `query`.
inline UpdateStatus greedy_update(HessianApproxState& state, const DirectionQuery& query) {
  const Index i = greedy_direction(query, state.g().diagonal());
  const Vector u = Vector::Unit(state.dim(), i);
  return bfgs_update(state, query.a_column(i), u);
}

template <class Source>
concept NormalSource = requires(Source& src) {
  { src() } -> std::convertible_to<double>;
};

/// Seeded standard-normal stream. Replays identically for a fixed seed on a
/// given toolchain.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// R^T u~ with u~ drawn entrywise from `source`; covariance R^T R.
template <NormalSource Source>
Vector random_direction(const UpperTriangular& r, Source& source) {
  Vector draw(r.dim());
  for (Index i = 0; i < draw.size(); ++i) {
    draw(i) = static_cast<double>(source());
  }
  return r.apply_transpose(draw);
}

}  // namespace sharpbfgs

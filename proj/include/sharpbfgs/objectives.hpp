#pragma once

// Objective oracles: the strongly convex quadratic and the l2-regularized
// logistic regression, exposing value, gradient, Hessian-vector products and
// Hessian diagonals together with the problem constants (mu, L, M).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <optional>
#include <string>
#include <utility>

#include "sharpbfgs/errors.hpp"
#include "sharpbfgs/linalg.hpp"

namespace sharpbfgs {

struct ProblemConstants {
  double mu = 1.0;   // strong convexity
  double lip = 1.0;  // gradient Lipschitz constant L
  double sc = 0.0;   // strong self-concordance constant M
  Index dim = 0;

  double kappa() const { return lip / mu; }

  void validate() const {
    if (!(mu > 0.0) || !(lip >= mu) || !(sc >= 0.0) || dim <= 0) {
      throw Error(ErrorCode::InvalidArgument, "ProblemConstants need 0 < mu <= L, M >= 0, d > 0");
    }
  }
};

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Derivative access consumed by the solvers.
class ObjectiveOracle {
 public:
  virtual ~ObjectiveOracle() = default;

  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Vector hess_vec(const Vector& x, const Vector& v) const = 0;
  virtual Vector hess_diag(const Vector& x) const = 0;

  /// Dense Hessian; the default assembles it column by column from hess_vec.
  virtual Matrix hess_full(const Vector& x) const {
    const Index d = dim();
    Matrix h(d, d);
    for (Index i = 0; i < d; ++i) {
      h.col(i) = hess_vec(x, Vector::Unit(d, i));
    }
    return 0.5 * (h + h.transpose());
  }

  virtual SpdMatrix hessian(const Vector& x) const { return SpdMatrix(hess_full(x)); }

  /// True when the Hessian does not depend on x.
  virtual bool constant_hessian() const { return false; }

  virtual std::string kind() const = 0;
  virtual std::string fingerprint() const = 0;

  const ProblemConstants& constants() const noexcept { return constants_; }
  Index dim() const noexcept { return constants_.dim; }

 protected:
  explicit ObjectiveOracle(ProblemConstants constants) : constants_(constants) {
    constants_.validate();
  }

  ProblemConstants constants_;
};

/// f(x) = 1/2 x^T A x + b^T x with mu I <= A <= L I.
struct QuadraticProblem {
  SpdMatrix a;
  Vector b;
  double mu;
  double lip;

  /// Eigenvalue bounds are computed from A. When `known` bounds are given they
  /// are checked against the computed ones to 1e-6 relative and then used.
  QuadraticProblem(SpdMatrix a_in, Vector b_in, std::optional<EigenRange> known = std::nullopt)
      : a(std::move(a_in)), b(std::move(b_in)) {
    require_same_dim(a.dim(), b.size(), "QuadraticProblem");
    const EigenRange computed = eig_range(a.entries());
    if (known) {
      if (std::abs(known->lo - computed.lo) > 1e-6 * std::abs(known->lo) ||
          std::abs(known->hi - computed.hi) > 1e-6 * std::abs(known->hi)) {
        throw Error(ErrorCode::InvalidArgument, "stated eigenvalue bounds do not match A");
      }
      mu = known->lo;
      lip = known->hi;
    } else {
      mu = computed.lo;
      lip = computed.hi;
    }
    if (!(mu > 0.0)) {
      throw Error(ErrorCode::NotPositiveDefinite, "QuadraticProblem: A is not positive definite");
    }
  }

  Vector minimizer() const { return a.solve(Vector(-b)); }
};

class QuadraticOracle final : public ObjectiveOracle {
 public:
  explicit QuadraticOracle(QuadraticProblem problem)
      : ObjectiveOracle({problem.mu, problem.lip, 0.0, problem.a.dim()}),
        problem_(std::move(problem)) {}

  double value(const Vector& x) const override {
    return 0.5 * x.dot(problem_.a.entries() * x) + problem_.b.dot(x);
  }
  Vector gradient(const Vector& x) const override {
    return problem_.a.entries() * x + problem_.b;
  }
  Vector hess_vec(const Vector&, const Vector& v) const override {
    return problem_.a.entries() * v;
  }
  Vector hess_diag(const Vector&) const override { return problem_.a.entries().diagonal(); }
  Matrix hess_full(const Vector&) const override { return problem_.a.entries(); }
  SpdMatrix hessian(const Vector&) const override { return problem_.a; }
  bool constant_hessian() const override { return true; }

  std::string kind() const override { return "quadratic"; }
  std::string fingerprint() const override {
    std::uint64_t h = 1469598103934665603ULL;
    detail::fnv1a(h, problem_.a.entries().data(),
                  sizeof(double) * static_cast<std::size_t>(problem_.a.entries().size()));
    detail::fnv1a(h, problem_.b.data(), sizeof(double) * static_cast<std::size_t>(problem_.b.size()));
    return detail::hex64(h);
  }

  const QuadraticProblem& problem() const noexcept { return problem_; }

 private:
  QuadraticProblem problem_;
};

/// l2-regularized logistic regression over unit-norm rows z_i with labels in {-1, +1}.
struct LogisticProblem {
  Matrix z;  // N x d
  Vector y;  // N labels
  double mu_reg;

  LogisticProblem(Matrix z_in, Vector y_in, double mu)
      : z(std::move(z_in)), y(std::move(y_in)), mu_reg(mu) {
    if (z.rows() == 0 || z.cols() == 0) {
      throw Error(ErrorCode::EmptyDataset, "LogisticProblem needs at least one row and column");
    }
    require_same_dim(z.rows(), y.size(), "LogisticProblem");
    if (!(mu_reg > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "LogisticProblem needs mu > 0");
    }
    for (Index i = 0; i < z.rows(); ++i) {
      if (std::abs(z.row(i).norm() - 1.0) > 1e-10) {
        throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(i) + " is not unit norm");
      }
      if (y(i) != 1.0 && y(i) != -1.0) {
        throw Error(ErrorCode::InvalidArgument, "labels must be -1 or +1");
      }
    }
  }

  Index n_samples() const { return z.rows(); }
  Index dim() const { return z.cols(); }

  /// Strong self-concordance constant from the Lipschitz-Hessian route:
  /// |phi'''| <= 1/(6 sqrt 3), ||y - x|| <= ||y - x||_w / sqrt(mu) and
  /// Z^T Z / N <= (lambda_max / mu) * hess f(w).
  double default_self_concordance() const {
    const double max_row = z.rowwise().norm().maxCoeff();
    const Matrix gram = z.transpose() * z / static_cast<double>(z.rows());
    const double lam_max = eig_range(gram).hi;
    return max_row * lam_max / (6.0 * std::sqrt(3.0) * std::pow(mu_reg, 1.5));
  }
};

class LogisticOracle final : public ObjectiveOracle {
 public:
  explicit LogisticOracle(LogisticProblem problem, std::optional<double> self_concordance = std::nullopt)
      : ObjectiveOracle({problem.mu_reg, 0.25 + problem.mu_reg,
                         self_concordance ? *self_concordance : problem.default_self_concordance(),
                         problem.dim()}),
        problem_(std::move(problem)) {}

  double value(const Vector& x) const override {
    const Vector margins = problem_.y.cwiseProduct(problem_.z * x);
    double loss = 0.0;
    for (Index i = 0; i < margins.size(); ++i) {
      loss += softplus(-margins(i));
    }
    return loss / n() + 0.5 * problem_.mu_reg * x.squaredNorm();
  }

  Vector gradient(const Vector& x) const override {
    const Vector margins = problem_.y.cwiseProduct(problem_.z * x);
    Vector coef(margins.size());
    for (Index i = 0; i < margins.size(); ++i) {
      coef(i) = -problem_.y(i) * logistic(-margins(i));
    }
    return problem_.z.transpose() * coef / n() + problem_.mu_reg * x;
  }

  Vector hess_vec(const Vector& x, const Vector& v) const override {
    const Vector w = weights(x);
    const Vector zv = problem_.z * v;
    return problem_.z.transpose() * w.cwiseProduct(zv) / n() + problem_.mu_reg * v;
  }

  Vector hess_diag(const Vector& x) const override {
    const Vector w = weights(x);
    Vector diag = (problem_.z.array().square().colwise() * w.array()).colwise().sum().transpose();
    diag /= n();
    diag.array() += problem_.mu_reg;
    return diag;
  }

  Matrix hess_full(const Vector& x) const override {
    const Vector w = weights(x);
    const Matrix scaled = problem_.z.transpose() * w.asDiagonal();
    Matrix h = scaled * problem_.z / n();
    h.diagonal().array() += problem_.mu_reg;
    return 0.5 * (h + h.transpose());
  }

  std::string kind() const override { return "logistic"; }
  std::string fingerprint() const override {
    std::uint64_t h = 1469598103934665603ULL;
    detail::fnv1a(h, problem_.z.data(), sizeof(double) * static_cast<std::size_t>(problem_.z.size()));
    detail::fnv1a(h, problem_.y.data(), sizeof(double) * static_cast<std::size_t>(problem_.y.size()));
    detail::fnv1a(h, &problem_.mu_reg, sizeof(double));
    return detail::hex64(h);
  }

  const LogisticProblem& problem() const noexcept { return problem_; }

 private:
  double n() const { return static_cast<double>(problem_.z.rows()); }

  static double logistic(double t) {
    if (t >= 0.0) {
      return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

  // log(1 + e^t)
  static double softplus(double t) {
    if (t > 0.0) {
      return t + std::log1p(std::exp(-t));
    }
    return std::log1p(std::exp(t));
  }

  Vector weights(const Vector& x) const {
    const Vector margins = problem_.z * x;  // labels square away
    Vector w(margins.size());
    for (Index i = 0; i < margins.size(); ++i) {
      const double s = logistic(margins(i));
      w(i) = s * (1.0 - s);
    }
    return w;
  }

  LogisticProblem problem_;
};

/// ||v||_z = sqrt(v^T hess f(z) v).
inline double local_norm(const ObjectiveOracle& oracle, const Vector& z, const Vector& v) {
  return std::sqrt(std::max(0.0, v.dot(oracle.hess_vec(z, v))));
}

inline double newton_decrement(const SpdMatrix& hessian, const Vector& grad) {
  return std::sqrt(std::max(0.0, grad.dot(hessian.solve(grad))));
}

/// lambda_f(x) = sqrt(grad^T hess^{-1} grad).
inline double newton_decrement(const ObjectiveOracle& oracle, const Vector& x) {
  return newton_decrement(oracle.hessian(x), oracle.gradient(x));
}

/// Composite-Simpson average of the Hessian over the segment [x, x + s].
/// Diagnostics only; the solvers never form this matrix.
inline SpdMatrix averaged_hessian(const ObjectiveOracle& oracle, const Vector& x, const Vector& s,
                                  int nodes = 21) {
  if (nodes < 3 || nodes % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "averaged_hessian needs an odd node count >= 3");
  }
  if (oracle.constant_hessian() || s.squaredNorm() == 0.0) {
    return oracle.hessian(x);
  }
  const double step = 1.0 / static_cast<double>(nodes - 1);
  Matrix acc = Matrix::Zero(x.size(), x.size());
  for (int k = 0; k < nodes; ++k) {
    const double weight = (k == 0 || k == nodes - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += weight * oracle.hess_full(x + (step * k) * s);
  }
  acc *= step / 3.0;
  return SpdMatrix(std::move(acc));
}

}  // namespace sharpbfgs

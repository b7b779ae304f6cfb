#pragma once

// Iterate-generating methods. All quasi-Newton methods take unit steps from
// G_0 = L I; gradient descent uses the 1/L step.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sharpbfgs/errors.hpp"
#include "sharpbfgs/kernel.hpp"
#include "sharpbfgs/linalg.hpp"
#include "sharpbfgs/objectives.hpp"

namespace sharpbfgs {

enum class Method {
  GD,
  BFGS,
  GreedyBFGS,
  SharpenedQuadratic,
  SharpenedGeneral,
  SharpenedRandomized,
};

inline constexpr Method kAllMethods[] = {Method::GD,
                                         Method::BFGS,
                                         Method::GreedyBFGS,
                                         Method::SharpenedQuadratic,
                                         Method::SharpenedGeneral,
                                         Method::SharpenedRandomized};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::GD: return "gd";
    case Method::BFGS: return "bfgs";
    case Method::GreedyBFGS: return "greedy";
    case Method::SharpenedQuadratic: return "sharpened-quadratic";
    case Method::SharpenedGeneral: return "sharpened";
    case Method::SharpenedRandomized: return "sharpened-random";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) {
      return m;
    }
  }
  return std::nullopt;
}

inline bool is_quasi_newton(Method m) { return m != Method::GD; }

enum class Diagnostics {
  Off,    // lambda only
  Basic,  // + sigma, theta against hess f(x_t), generalized eigenvalues, update residuals
  Full,   // + theta against the averaged Hessian on non-quadratic objectives
};

inline std::string to_string(Diagnostics d) {
  switch (d) {
    case Diagnostics::Off: return "off";
    case Diagnostics::Basic: return "basic";
    case Diagnostics::Full: return "full";
  }
  return "unknown";
}

inline std::optional<Diagnostics> parse_diagnostics(const std::string& name) {
  for (Diagnostics d : {Diagnostics::Off, Diagnostics::Basic, Diagnostics::Full}) {
    if (to_string(d) == name) {
      return d;
    }
  }
  return std::nullopt;
}

struct SolverConfig {
  Method method = Method::SharpenedGeneral;
  int max_iters = 1000;
  /// Stop when ||grad f|| <= tol_grad; unset means 1e-12 * max(1, ||grad f(x_0)||).
  std::optional<double> tol_grad;
  /// Stop when lambda_t <= tol_lambda; 0 disables.
  double tol_lambda = 0.0;
  /// Scale G by (1 + M r_t / 2)^2 before the second update.
  bool correction_enabled = false;
  std::uint64_t rng_seed = 42;
  Diagnostics diagnostics = Diagnostics::Basic;
  /// lambda and diagnostics are computed every `diagnostics_stride` iterations.
  int diagnostics_stride = 1;
  int quadrature_nodes = 21;
  bool record_x = false;
  bool record_timing = true;

  void validate() const {
    if (max_iters < 1) {
      throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    }
    if ((tol_grad && !(*tol_grad >= 0.0)) || !(tol_lambda >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "tolerances must be >= 0");
    }
    if (diagnostics_stride < 1) {
      throw Error(ErrorCode::InvalidArgument, "diagnostics_stride must be >= 1");
    }
    if (quadrature_nodes < 3 || quadrature_nodes % 2 == 0) {
      throw Error(ErrorCode::InvalidArgument, "quadrature_nodes must be odd and >= 3");
    }
  }
};

/// State at x_t. Fields describing the step t -> t+1 (theta, r, ...) are empty
/// on the terminal record.
struct IterationRecord {
  long t = 0;
  std::optional<Vector> x;
  double f = 0.0;
  double grad_norm = 0.0;
  std::optional<double> lambda;
  std::optional<double> sigma;           // sigma(hess f(x_t), G_t)
  std::optional<double> theta;           // quadratic: theta(A, G_t, s_t); general: theta(J_t, G_t, s_t)
  std::optional<double> theta_local;     // theta(hess f(x_t), G_t, s_t)
  std::optional<double> r;               // ||s_t||_{x_t}
  std::optional<double> min_gen_eig;     // extreme eigenvalues of the pencil (G_t, hess f(x_t))
  std::optional<double> max_gen_eig;
  std::optional<double> update_gain;     // sum of (u^T G u / u^T A u - 1) over updates against a fixed A
  std::optional<double> secant_residual; // ||Gbar_t s_t - y_t|| / ||y_t||
  std::optional<double> inverse_drift;   // ||G_{t+1} H_{t+1} - I||_F
  std::int64_t wall_nanos = 0;
  bool skipped_update = false;
};

enum class TerminalReason { GradTol, LambdaTol, MaxIters, NumericalFailure };

inline std::string to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::GradTol: return "GradTol";
    case TerminalReason::LambdaTol: return "LambdaTol";
    case TerminalReason::MaxIters: return "MaxIters";
    case TerminalReason::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

inline std::optional<TerminalReason> parse_terminal_reason(const std::string& s) {
  for (auto r : {TerminalReason::GradTol, TerminalReason::LambdaTol, TerminalReason::MaxIters,
                 TerminalReason::NumericalFailure}) {
    if (to_string(r) == s) {
      return r;
    }
  }
  return std::nullopt;
}

struct ProblemInfo {
  std::string kind;
  std::string fingerprint;
  ProblemConstants constants;
  bool quadratic = false;
};

struct RunResult {
  std::vector<IterationRecord> records;
  TerminalReason terminal_reason = TerminalReason::MaxIters;
  SolverConfig config;
  ProblemInfo problem;
  Vector x_final;
  std::string failure_message;

  double lambda0() const {
    return records.empty() || !records.front().lambda ? 0.0 : *records.front().lambda;
  }
  long iterations() const { return records.empty() ? 0 : records.back().t; }
};

/// d^{-3/2} (1, ..., 1).
inline Vector default_x0(Index d) {
  return Vector::Constant(d, std::pow(static_cast<double>(d), -1.5));
}

namespace detail {

inline bool finite(const Vector& v) { return v.allFinite(); }

/// Per-iteration bookkeeping shared by all methods.
class SolverRun {
 public:
  SolverRun(const ObjectiveOracle& oracle, const Vector& x0, const SolverConfig& config)
      : oracle_(oracle),
        config_(config),
        state_(HessianApproxState::scaled_identity(oracle.dim(), oracle.constants().lip)),
        rng_(config.rng_seed),
        x_(x0) {
    config_.validate();
    require_same_dim(oracle.dim(), x0.size(), "solver x0");
    if (config_.method == Method::SharpenedQuadratic && !oracle.constant_hessian()) {
      throw Error(ErrorCode::InvalidArgument, "sharpened-quadratic needs a quadratic objective");
    }
    result_.config = config_;
    result_.problem = {oracle.kind(), oracle.fingerprint(), oracle.constants(), oracle.constant_hessian()};
  }

  RunResult run() {
    const auto start = std::chrono::steady_clock::now();
    f_ = oracle_.value(x_);
    g_ = oracle_.gradient(x_);
    if (!std::isfinite(f_) || !finite(g_)) {
      throw Error(ErrorCode::NumericalFailure, "objective is not finite at x0");
    }
    const double tol_grad = config_.tol_grad.value_or(1e-12 * std::max(1.0, g_.norm()));

    for (long t = 0;; ++t) {
      IterationRecord rec;
      rec.t = t;
      rec.f = f_;
      rec.grad_norm = g_.norm();
      if (config_.record_x) {
        rec.x = x_;
      }
      const bool sample = t % config_.diagnostics_stride == 0;
      std::optional<SpdMatrix> hess_here;
      try {
        if (sample) {
          hess_here.emplace(oracle_.hessian(x_));
          rec.lambda = newton_decrement(*hess_here, g_);
        }
      } catch (const Error& e) {
        return fail(std::move(rec), start, e.what());
      }

      std::optional<TerminalReason> stop;
      if (rec.grad_norm <= tol_grad) {
        stop = TerminalReason::GradTol;
      } else if (config_.tol_lambda > 0.0 && rec.lambda && *rec.lambda <= config_.tol_lambda) {
        stop = TerminalReason::LambdaTol;
      } else if (t >= config_.max_iters) {
        stop = TerminalReason::MaxIters;
      }
      if (stop) {
        stamp(rec, start);
        result_.records.push_back(std::move(rec));
        result_.terminal_reason = *stop;
        result_.x_final = x_;
        return std::move(result_);
      }

      const Vector s = config_.method == Method::GD ? Vector(-g_ / oracle_.constants().lip)
                                                    : Vector(-(state_.h() * g_));
      const Vector x_next = x_ + s;
      const double f_next = oracle_.value(x_next);
      // With a constant Hessian the gradient is carried by the residual
      // recurrence g+ = g + A s. Re-evaluating A x + b at the rounded iterate
      // would put an absolute floor of about eps * L * ||x|| under lambda.
      const Vector y = oracle_.constant_hessian() ? oracle_.hess_vec(x_, s) : Vector(oracle_.gradient(x_next) - g_);
      const Vector g_next = g_ + y;
      if (!std::isfinite(f_next) || !finite(g_next)) {
        return fail(std::move(rec), start, "non-finite objective after step " + std::to_string(t));
      }
      rec.r = local_norm(oracle_, x_, s);

      try {
        if (sample && config_.diagnostics != Diagnostics::Off && is_quasi_newton(config_.method)) {
          pre_update_diagnostics(rec, *hess_here, s);
        }
        if (is_quasi_newton(config_.method)) {
          update(rec, s, y, x_next, sample);
        }
      } catch (const Error& e) {
        return fail(std::move(rec), start, e.what());
      }

      stamp(rec, start);
      result_.records.push_back(std::move(rec));
      x_ = x_next;
      f_ = f_next;
      g_ = g_next;
    }
  }

 private:
  bool diagnose(bool sample) const {
    return sample && config_.diagnostics != Diagnostics::Off;
  }

  void pre_update_diagnostics(IterationRecord& rec, const SpdMatrix& hess, const Vector& s) {
    const Matrix& g = state_.g();
    rec.sigma = sigma(hess, g);
    const EigenRange range = generalized_eig_range(SpdMatrix(g), hess);
    rec.min_gen_eig = range.lo;
    rec.max_gen_eig = range.hi;
    if (s.squaredNorm() > 0.0) {
      rec.theta_local = theta(hess, g, s);
      if (oracle_.constant_hessian()) {
        rec.theta = rec.theta_local;
      } else if (config_.diagnostics == Diagnostics::Full) {
        const SpdMatrix avg = averaged_hessian(oracle_, x_, s, config_.quadrature_nodes);
        rec.theta = theta(avg, g, s);
      }
    }
  }

  void add_gain(IterationRecord& rec, bool sample, double ugu, double uau) {
    if (diagnose(sample) && oracle_.constant_hessian() && uau > 0.0) {
      rec.update_gain = rec.update_gain.value_or(0.0) + (ugu / uau - 1.0);
    }
  }

  void note(IterationRecord& rec, UpdateStatus status) {
    if (status != UpdateStatus::Applied) {
      rec.skipped_update = true;
    }
  }

  void correction(const IterationRecord& rec) {
    if (config_.correction_enabled) {
      const double factor = 1.0 + oracle_.constants().sc * rec.r.value_or(0.0) / 2.0;
      scale_state(state_, factor * factor);
    }
  }

  void greedy_step(IterationRecord& rec, const Vector& x_next, bool sample) {
    DirectionQuery query{oracle_.hess_diag(x_next),
                         [&](Index i) { return oracle_.hess_vec(x_next, Vector::Unit(x_next.size(), i)); }};
    const Index i = greedy_direction(query, state_.g().diagonal());
    add_gain(rec, sample, state_.g()(i, i), query.a_diag(i));
    note(rec, bfgs_update(state_, query.a_column(i), Vector::Unit(x_next.size(), i)));
  }

  void random_step(IterationRecord& rec, const Vector& x_next, bool sample) {
    const UpperTriangular r = cholesky(state_.g_spd());
    const Vector u = random_direction(r, rng_);
    const Vector au = oracle_.hess_vec(x_next, u);
    add_gain(rec, sample, u.dot(state_.g() * u), u.dot(au));
    note(rec, bfgs_update(state_, au, u));
  }

  void secant_step(IterationRecord& rec, const Vector& s, const Vector& y, bool sample) {
    add_gain(rec, sample, s.dot(state_.g() * s), s.dot(y));
    const UpdateStatus status = bfgs_update_secant(state_, s, y);
    note(rec, status);
    if (diagnose(sample) && status == UpdateStatus::Applied) {
      rec.secant_residual = (state_.g() * s - y).norm() / y.norm();
    }
  }

  void update(IterationRecord& rec, const Vector& s, const Vector& y, const Vector& x_next, bool sample) {
    switch (config_.method) {
      case Method::GD:
        return;
      case Method::BFGS:
        secant_step(rec, s, y, sample);
        break;
      case Method::GreedyBFGS:
        correction(rec);
        greedy_step(rec, x_next, sample);
        break;
      case Method::SharpenedQuadratic: {
        const Vector as = oracle_.hess_vec(x_, s);
        add_gain(rec, sample, s.dot(state_.g() * s), s.dot(as));
        const UpdateStatus status = bfgs_update(state_, as, s);
        note(rec, status);
        if (diagnose(sample) && status == UpdateStatus::Applied) {
          rec.secant_residual = (state_.g() * s - y).norm() / y.norm();
        }
        greedy_step(rec, x_next, sample);
        break;
      }
      case Method::SharpenedGeneral:
        secant_step(rec, s, y, sample);
        correction(rec);
        greedy_step(rec, x_next, sample);
        break;
      case Method::SharpenedRandomized:
        secant_step(rec, s, y, sample);
        correction(rec);
        random_step(rec, x_next, sample);
        break;
    }
    if (diagnose(sample)) {
      rec.inverse_drift = state_.inverse_drift();
    }
  }

  void stamp(IterationRecord& rec, std::chrono::steady_clock::time_point start) const {
    if (config_.record_timing) {
      rec.wall_nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    }
  }

  RunResult fail(IterationRecord rec, std::chrono::steady_clock::time_point start, std::string message) {
    // The record at x_t is still valid; step diagnostics are dropped.
    rec.theta.reset();
    rec.theta_local.reset();
    rec.r.reset();
    rec.update_gain.reset();
    rec.secant_residual.reset();
    rec.inverse_drift.reset();
    stamp(rec, start);
    result_.records.push_back(std::move(rec));
    result_.terminal_reason = TerminalReason::NumericalFailure;
    result_.failure_message = std::move(message);
    result_.x_final = x_;
    return std::move(result_);
  }

  const ObjectiveOracle& oracle_;
  SolverConfig config_;
  HessianApproxState state_;
  GaussianSource rng_;
  Vector x_;
  Vector g_;
  double f_ = 0.0;
  RunResult result_;
};

}  // namespace detail

inline RunResult run_solver(const ObjectiveOracle& oracle, const Vector& x0, const SolverConfig& config) {
  return detail::SolverRun(oracle, x0, config).run();
}

namespace detail {
inline RunResult run_as(Method m, const ObjectiveOracle& oracle, const Vector& x0, SolverConfig config) {
  config.method = m;
  return run_solver(oracle, x0, config);
}
}  // namespace detail

inline RunResult run_gd(const ObjectiveOracle& o, const Vector& x0, const SolverConfig& c) {
  return detail::run_as(Method::GD, o, x0, c);
}
inline RunResult run_bfgs(const ObjectiveOracle& o, const Vector& x0, const SolverConfig& c) {
  return detail::run_as(Method::BFGS, o, x0, c);
}
inline RunResult run_greedy_bfgs(const ObjectiveOracle& o, const Vector& x0, const SolverConfig& c) {
  return detail::run_as(Method::GreedyBFGS, o, x0, c);
}
inline RunResult run_sharpened_quadratic(const ObjectiveOracle& o, const Vector& x0, const SolverConfig& c) {
  return detail::run_as(Method::SharpenedQuadratic, o, x0, c);
}
inline RunResult run_sharpened_general(const ObjectiveOracle& o, const Vector& x0, const SolverConfig& c) {
  return detail::run_as(Method::SharpenedGeneral, o, x0, c);
}
inline RunResult run_sharpened_randomized(const ObjectiveOracle& o, const Vector& x0, const SolverConfig& c) {
  return detail::run_as(Method::SharpenedRandomized, o, x0, c);
}

/// First t with lambda_t <= ratio * lambda_0, if reached.
inline std::optional<long> iterations_to_ratio(const RunResult& result, double ratio) {
  const double lam0 = result.lambda0();
  for (const auto& rec : result.records) {
    if (rec.lambda && *rec.lambda <= ratio * lam0) {
      return rec.t;
    }
  }
  return std::nullopt;
}

}  // namespace sharpbfgs

#pragma once

// Theoretical rate envelopes and post-hoc certification of recorded runs
// against the per-iteration inequalities and convergence bounds.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharpbfgs/errors.hpp"
#include "sharpbfgs/objectives.hpp"
#include "sharpbfgs/solvers.hpp"

namespace sharpbfgs {

enum class EnvelopeKind {
  LinearQuadCase,         // (1 - mu/L)^t
  SuperlinearQuadCase,    // (1 - mu/(dL))^{t(t-1)/4} (dL/(t mu))^{t/2}
  LinearGeneral,          // (1 - mu/(2L))^t
  SuperlinearGeneral,     // 2 (1 - mu/(2dL))^{t(t-1)/4} (8dL/(t mu))^{t/2}
  SuperlinearRandomized,  // 2 (1 - 1/(2d))^{t(t-1)/4} (8dL/(t mu))^{t/2}
  BfgsTable1,             // (d ln(kappa) / t)^{t/2}
  GreedyTable1,           // (d kappa (1 - 1/(d kappa))^{t/2})^t
};

inline std::string to_string(EnvelopeKind k) {
  switch (k) {
    case EnvelopeKind::LinearQuadCase: return "linear-quadratic";
    case EnvelopeKind::SuperlinearQuadCase: return "superlinear-quadratic";
    case EnvelopeKind::LinearGeneral: return "linear-general";
    case EnvelopeKind::SuperlinearGeneral: return "superlinear-general";
    case EnvelopeKind::SuperlinearRandomized: return "superlinear-randomized";
    case EnvelopeKind::BfgsTable1: return "bfgs-table";
    case EnvelopeKind::GreedyTable1: return "greedy-table";
  }
  return "unknown";
}

inline std::optional<EnvelopeKind> parse_envelope(const std::string& s) {
  for (auto k : {EnvelopeKind::LinearQuadCase, EnvelopeKind::SuperlinearQuadCase,
                 EnvelopeKind::LinearGeneral, EnvelopeKind::SuperlinearGeneral,
                 EnvelopeKind::SuperlinearRandomized, EnvelopeKind::BfgsTable1,
                 EnvelopeKind::GreedyTable1}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  return std::nullopt;
}

struct RateEnvelope {
  EnvelopeKind kind;
  ProblemConstants constants;
  double lambda0 = 1.0;
};

struct EnvelopeValue {
  double log_value;  // natural log of the bound
  double value;      // exp(log_value); 0 or inf when not representable
};

namespace detail {

/// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

inline EnvelopeValue envelope_value(const RateEnvelope& e, long t) {
  if (t < 1) {
    throw Error(ErrorCode::DomainError, "envelope_value needs t >= 1");
  }
  const double mu = e.constants.mu;
  const double lip = e.constants.lip;
  const double d = static_cast<double>(e.constants.dim);
  const double kappa = lip / mu;
  const double tt = static_cast<double>(t);
  const double quad_exp = tt * (tt - 1.0) / 4.0;

  detail::CompensatedSum acc;
  acc.add(std::log(e.lambda0));
  switch (e.kind) {
    case EnvelopeKind::LinearQuadCase:
      acc.add(tt * std::log1p(-mu / lip));
      break;
    case EnvelopeKind::SuperlinearQuadCase:
      acc.add(quad_exp * std::log1p(-mu / (d * lip)));
      acc.add(tt / 2.0 * std::log(d * lip / (tt * mu)));
      break;
    case EnvelopeKind::LinearGeneral:
      acc.add(tt * std::log1p(-mu / (2.0 * lip)));
      break;
    case EnvelopeKind::SuperlinearGeneral:
      acc.add(std::log(2.0));
      acc.add(quad_exp * std::log1p(-mu / (2.0 * d * lip)));
      acc.add(tt / 2.0 * std::log(8.0 * d * lip / (tt * mu)));
      break;
    case EnvelopeKind::SuperlinearRandomized:
      acc.add(std::log(2.0));
      acc.add(quad_exp * std::log1p(-1.0 / (2.0 * d)));
      acc.add(tt / 2.0 * std::log(8.0 * d * lip / (tt * mu)));
      break;
    case EnvelopeKind::BfgsTable1:
      acc.add(tt / 2.0 * std::log(d * std::log(kappa) / tt));
      break;
    case EnvelopeKind::GreedyTable1:
      acc.add(tt * std::log(d * kappa));
      acc.add(tt * tt / 2.0 * std::log1p(-1.0 / (d * kappa)));
      break;
  }
  const double log_value = acc.value();
  return {log_value, std::exp(log_value)};
}

/// Smallest t* such that `lower` stays strictly below `upper` for every
/// t in [t*, t_max], scanning in log-space.
inline std::optional<long> envelope_crossover(const RateEnvelope& lower, const RateEnvelope& upper,
                                              long t_max) {
  std::optional<long> first;
  for (long t = t_max; t >= 1; --t) {
    if (envelope_value(lower, t).log_value < envelope_value(upper, t).log_value) {
      first = t;
    } else {
      break;
    }
  }
  return first;
}

// ---------------------------------------------------------------------------
// Locality radii

inline const double kC0 = 0.25 * std::log(1.5);
inline const double kC1 = std::log(2.0) / 20.0;

enum class Locality { InsideTheorem3Ball, InsideTheorem4Ball, Outside };

inline std::string to_string(Locality l) {
  switch (l) {
    case Locality::InsideTheorem3Ball: return "InsideTheorem3Ball";
    case Locality::InsideTheorem4Ball: return "InsideTheorem4Ball";
    case Locality::Outside: return "Outside";
  }
  return "Unknown";
}

struct LocalityRadii {
  double linear;       // C0 mu / (M L)
  double superlinear;  // C1 mu / (d M L)
};

inline LocalityRadii locality_radii(const ProblemConstants& c) {
  if (!(c.sc > 0.0)) {
    throw Error(ErrorCode::DomainError, "locality radii need M > 0");
  }
  return {kC0 * c.mu / (c.sc * c.lip),
          kC1 * c.mu / (static_cast<double>(c.dim) * c.sc * c.lip)};
}

/// Classifies lambda_0 against the linear-rate and superlinear-rate radii.
/// The superlinear ball is reported whenever it contains lambda_0.
inline Locality locality_check(const ProblemConstants& c, double lambda0) {
  const LocalityRadii radii = locality_radii(c);
  if (lambda0 <= radii.superlinear) {
    return Locality::InsideTheorem4Ball;
  }
  if (lambda0 <= radii.linear) {
    return Locality::InsideTheorem3Ball;
  }
  return Locality::Outside;
}

// ---------------------------------------------------------------------------
// Certification

enum class CheckStatus { Pass, Fail, HypothesisFailed, NotEvaluated, NotApplicable };

inline std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "Pass";
    case CheckStatus::Fail: return "Fail";
    case CheckStatus::HypothesisFailed: return "HypothesisFailed";
    case CheckStatus::NotEvaluated: return "NotEvaluated";
    case CheckStatus::NotApplicable: return "NotApplicable";
  }
  return "Unknown";
}

struct CheckEntry {
  long t;
  double slack;      // rhs - lhs; negative means the inequality is violated
  double tolerance;  // entries pass when slack >= -tolerance
  CheckStatus status;
};

struct InequalityReport {
  std::string name;
  CheckStatus status = CheckStatus::NotApplicable;
  std::string note;
  std::vector<CheckEntry> entries;

  std::size_t count(CheckStatus s) const {
    std::size_t n = 0;
    for (const auto& e : entries) {
      n += e.status == s ? 1 : 0;
    }
    return n;
  }
};

struct CertificationReport {
  std::string method;
  std::string problem_kind;
  std::vector<InequalityReport> inequalities;

  bool all_pass() const {
    for (const auto& q : inequalities) {
      if (q.status == CheckStatus::Fail) {
        return false;
      }
    }
    return true;
  }

  const InequalityReport* find(const std::string& name) const {
    for (const auto& q : inequalities) {
      if (q.name == name) {
        return &q;
      }
    }
    return nullptr;
  }
};

inline constexpr double kAbsTolerance = 1e-8;
inline constexpr double kEnvelopeRelTolerance = 1e-6;
inline constexpr double kEnvelopeFloor = 1e-300;
inline constexpr double kSigmaSumTolerance = 1e-6;
/// lambda values below this are at the double-precision floor of the oracles
/// and are not used to judge per-step identities.
inline constexpr double kLambdaNoiseFloor = 1e-13;
/// Absolute rounding in lambda when the gradient is re-evaluated from data.
inline constexpr double kLambdaAbsNoise = 1e-15;
/// A <= G is treated as holding when the smallest eigenvalue of the pencil
/// (G, A) is at least 1 - kOrderingSlack.
inline constexpr double kOrderingSlack = 1e-8;

namespace detail {

inline void finalize(InequalityReport& q) {
  if (q.status == CheckStatus::NotApplicable || (q.status == CheckStatus::HypothesisFailed && q.entries.empty())) {
    return;
  }
  if (q.entries.empty()) {
    q.status = CheckStatus::NotEvaluated;
    return;
  }
  if (q.count(CheckStatus::Fail) > 0) {
    q.status = CheckStatus::Fail;
  } else if (q.count(CheckStatus::Pass) > 0) {
    q.status = CheckStatus::Pass;
  } else if (q.count(CheckStatus::HypothesisFailed) > 0) {
    q.status = CheckStatus::HypothesisFailed;
  } else {
    q.status = CheckStatus::NotEvaluated;
  }
}

inline CheckEntry judge(long t, double slack, double tol) {
  return {t, slack, tol, slack >= -tol ? CheckStatus::Pass : CheckStatus::Fail};
}

inline CheckEntry envelope_entry(long t, double lambda, const RateEnvelope& env) {
  const EnvelopeValue bound = envelope_value(env, t);
  if (lambda < kEnvelopeFloor) {
    return {t, bound.value - lambda, 0.0, CheckStatus::Pass};
  }
  // log-space comparison: log(lambda) <= log(bound) + log(1 + rel)
  const double slack = bound.log_value - std::log(lambda);
  return judge(t, slack, std::log1p(kEnvelopeRelTolerance));
}

inline bool ordered(const IterationRecord& r) {
  return r.min_gen_eig && *r.min_gen_eig >= 1.0 - kOrderingSlack;
}

struct Context {
  const RunResult& run;
  Method method;
  const ProblemConstants& c;
  bool quadratic;
  double d;
  double lambda0;
};

inline InequalityReport envelope_check(const Context& ctx, const std::string& name, EnvelopeKind kind) {
  InequalityReport q{name, CheckStatus::Pass, "", {}};
  const RateEnvelope env{kind, ctx.c, ctx.lambda0};
  for (const auto& rec : ctx.run.records) {
    if (rec.t < 1 || !rec.lambda) {
      continue;
    }
    q.entries.push_back(envelope_entry(rec.t, *rec.lambda, env));
  }
  return q;
}

/// Weighted sum  sum_{i<t} theta_i^2 / (1 - rate)^i <= bound, one entry per t >= 1.
inline InequalityReport theta_sum_check(const Context& ctx, const std::string& name, double rate,
                                        double bound, bool use_local_theta) {
  InequalityReport q{name, CheckStatus::Pass, "", {}};
  CompensatedSum sum;
  const auto& recs = ctx.run.records;
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    const auto& th = use_local_theta ? recs[i].theta_local : recs[i].theta;
    if (!th) {
      q.note = "theta missing at t=" + std::to_string(recs[i].t);
      q.entries.clear();
      return q;
    }
    sum.add(std::exp(2.0 * std::log(std::max(*th, 1e-300)) -
                     static_cast<double>(recs[i].t) * std::log1p(-rate)));
    q.entries.push_back(judge(recs[i + 1].t, bound - sum.value(), kSigmaSumTolerance));
  }
  return q;
}

inline InequalityReport not_applicable(const std::string& name, const std::string& note = "") {
  return {name, CheckStatus::NotApplicable, note, {}};
}

inline InequalityReport hypothesis_failed(const std::string& name, const std::string& note) {
  return {name, CheckStatus::HypothesisFailed, note, {}};
}

}  // namespace detail

/// Evaluates every inequality that applies to the run's method and problem.
/// Inequalities whose required diagnostics are absent are NotEvaluated;
/// run-level hypotheses that fail (locality, correction off) give HypothesisFailed.
inline CertificationReport certify_run(const RunResult& run) {
  using namespace detail;
  const Method method = run.config.method;
  const ProblemConstants& c = run.problem.constants;
  const bool quadratic = run.problem.quadratic;
  const bool qn = is_quasi_newton(method);
  const Context ctx{run, method, c, quadratic, static_cast<double>(c.dim), run.lambda0()};
  const auto& recs = run.records;
  const double mu = c.mu;
  const double lip = c.lip;
  const double d = ctx.d;
  const double big_m = c.sc;

  CertificationReport report;
  report.method = to_string(method);
  report.problem_kind = run.problem.kind;
  auto& out = report.inequalities;

  // Gradient descent: monotone objective.
  {
    InequalityReport q = method == Method::GD ? InequalityReport{"gd_f_monotone", CheckStatus::Pass, "", {}}
                                              : not_applicable("gd_f_monotone");
    if (method == Method::GD) {
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        q.entries.push_back(judge(recs[i].t, recs[i].f - recs[i + 1].f,
                                  kAbsTolerance * std::max(1.0, std::abs(recs[i].f))));
      }
    }
    out.push_back(std::move(q));
  }

  // lambda_{t+1} = theta(A, G_t, s_t) lambda_t on quadratics.
  {
    InequalityReport q = qn && quadratic ? InequalityReport{"quad_lambda_exactness", CheckStatus::Pass, "", {}}
                                         : not_applicable("quad_lambda_exactness");
    if (qn && quadratic) {
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto& a = recs[i];
        const auto& b = recs[i + 1];
        if (!a.lambda || !b.lambda || !a.theta) {
          continue;
        }
        if (*a.lambda < kLambdaNoiseFloor) {
          q.entries.push_back({a.t, 0.0, 0.0, CheckStatus::NotEvaluated});
          continue;
        }
        q.entries.push_back(judge(a.t, -std::abs(*b.lambda - *a.theta * *a.lambda), kAbsTolerance * *a.lambda));
      }
    }
    out.push_back(std::move(q));
  }

  // sigma_t - sigma_{t+1} >= sum of (u^T G u / u^T A u - 1) over the updates.
  {
    InequalityReport q = qn && quadratic ? InequalityReport{"sigma_decrease", CheckStatus::Pass, "", {}}
                                         : not_applicable("sigma_decrease");
    if (qn && quadratic) {
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto& a = recs[i];
        const auto& b = recs[i + 1];
        if (!a.sigma || !b.sigma || !a.update_gain) {
          continue;
        }
        if (!ordered(a)) {
          q.entries.push_back({a.t, 0.0, 0.0, CheckStatus::HypothesisFailed});
          continue;
        }
        q.entries.push_back(judge(a.t, (*a.sigma - *b.sigma) - *a.update_gain, kAbsTolerance));
      }
    }
    out.push_back(std::move(q));
  }

  // Greedy factor on quadratics.
  {
    const bool applies = method == Method::GreedyBFGS && quadratic;
    InequalityReport q = applies ? InequalityReport{"greedy_factor", CheckStatus::Pass, "", {}}
                                 : not_applicable("greedy_factor");
    if (applies) {
      const double factor = 1.0 - mu / (d * lip);
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto& a = recs[i];
        const auto& b = recs[i + 1];
        if (!a.sigma || !b.sigma) {
          continue;
        }
        if (!ordered(a)) {
          q.entries.push_back({a.t, 0.0, 0.0, CheckStatus::HypothesisFailed});
          continue;
        }
        q.entries.push_back(judge(a.t, factor * *a.sigma - *b.sigma, kAbsTolerance));
      }
    }
    out.push_back(std::move(q));
  }

  // Sharpened on quadratics.
  const bool sharpened_quadratic =
      quadratic && (method == Method::SharpenedQuadratic || method == Method::SharpenedGeneral);
  {
    InequalityReport q = sharpened_quadratic ? InequalityReport{"quad_theta_bound", CheckStatus::Pass, "", {}}
                                             : not_applicable("quad_theta_bound");
    if (sharpened_quadratic) {
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        if (recs[i].theta) {
          q.entries.push_back(judge(recs[i].t, (1.0 - mu / lip) - *recs[i].theta, kAbsTolerance));
        }
      }
    }
    out.push_back(std::move(q));
  }
  out.push_back(sharpened_quadratic ? envelope_check(ctx, "quad_linear_envelope", EnvelopeKind::LinearQuadCase)
                                    : not_applicable("quad_linear_envelope"));
  {
    InequalityReport q = sharpened_quadratic
                             ? InequalityReport{"quad_sigma_recursion", CheckStatus::Pass, "", {}}
                             : not_applicable("quad_sigma_recursion");
    if (sharpened_quadratic) {
      const double factor = 1.0 - mu / (d * lip);
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto& a = recs[i];
        const auto& b = recs[i + 1];
        if (!a.sigma || !b.sigma || !a.theta) {
          continue;
        }
        if (!ordered(a)) {
          q.entries.push_back({a.t, 0.0, 0.0, CheckStatus::HypothesisFailed});
          continue;
        }
        const double rhs = factor * (*a.sigma - *a.theta * *a.theta);
        q.entries.push_back(judge(a.t, rhs - *b.sigma, kAbsTolerance));
      }
    }
    out.push_back(std::move(q));
  }
  if (sharpened_quadratic && !recs.empty() && recs.front().sigma) {
    out.push_back(theta_sum_check(ctx, "quad_theta_sum", mu / (d * lip), *recs.front().sigma, false));
  } else {
    out.push_back(sharpened_quadratic ? InequalityReport{"quad_theta_sum", CheckStatus::NotEvaluated, "sigma_0 missing", {}}
                                      : not_applicable("quad_theta_sum"));
  }
  out.push_back(sharpened_quadratic
                    ? envelope_check(ctx, "quad_superlinear_envelope", EnvelopeKind::SuperlinearQuadCase)
                    : not_applicable("quad_superlinear_envelope"));

  // r_t <= lambda_t whenever hess f(x_t) <= G_t.
  {
    InequalityReport q = qn ? InequalityReport{"local_norm_bound", CheckStatus::Pass, "", {}}
                            : not_applicable("local_norm_bound");
    if (qn) {
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto& a = recs[i];
        if (!a.r || !a.lambda || !a.min_gen_eig) {
          continue;
        }
        if (!ordered(a)) {
          q.entries.push_back({a.t, 0.0, 0.0, CheckStatus::HypothesisFailed});
          continue;
        }
        q.entries.push_back(judge(a.t, *a.lambda - *a.r, kAbsTolerance * std::max(*a.lambda, 1e-300)));
      }
    }
    out.push_back(std::move(q));
  }

  // General objectives.
  const bool general = qn && !quadratic;
  {
    InequalityReport q = general ? InequalityReport{"lambda_contraction", CheckStatus::Pass, "", {}}
                                 : not_applicable("lambda_contraction");
    if (general) {
      for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto& a = recs[i];
        const auto& b = recs[i + 1];
        if (!a.theta || !a.lambda || !b.lambda || !a.r) {
          continue;
        }
        if (*a.lambda < kLambdaNoiseFloor) {
          q.entries.push_back({a.t, 0.0, 0.0, CheckStatus::NotEvaluated});
          continue;
        }
        const double rhs = (1.0 + big_m * *a.r / 2.0) * *a.theta * *a.lambda;
        q.entries.push_back(judge(a.t, rhs - *b.lambda, std::max(kAbsTolerance * *a.lambda, kLambdaAbsNoise)));
      }
    }
    out.push_back(std::move(q));
  }

  const bool sharpened_general =
      general && (method == Method::SharpenedGeneral || method == Method::SharpenedRandomized);
  std::optional<Locality> locality;
  std::string hypothesis_note;
  if (sharpened_general) {
    if (!run.config.correction_enabled) {
      hypothesis_note = "correction disabled";
    } else if (big_m > 0.0) {
      locality = locality_check(c, ctx.lambda0);
      if (*locality == Locality::Outside) {
        hypothesis_note = "lambda_0 outside the local convergence ball";
      }
    } else {
      locality = Locality::InsideTheorem4Ball;
    }
  }
  const bool linear_ok = sharpened_general && hypothesis_note.empty();
  const bool superlinear_ok = linear_ok && locality == Locality::InsideTheorem4Ball;
  auto gated = [&](bool applies, bool ok, const std::string& name, auto&& build) {
    if (!applies) {
      out.push_back(not_applicable(name));
    } else if (!ok) {
      out.push_back(hypothesis_failed(name, hypothesis_note.empty() ? "lambda_0 outside the superlinear ball"
                                                                  : hypothesis_note));
    } else {
      out.push_back(build());
    }
  };

  gated(sharpened_general, linear_ok, "general_theta_bound", [&] {
    InequalityReport q{"general_theta_bound", CheckStatus::Pass, "", {}};
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
      if (recs[i].theta) {
        q.entries.push_back(judge(recs[i].t, (1.0 - 2.0 * mu / (3.0 * lip)) - *recs[i].theta, kAbsTolerance));
      }
    }
    return q;
  });
  gated(sharpened_general, linear_ok, "general_linear_envelope",
        [&] { return envelope_check(ctx, "general_linear_envelope", EnvelopeKind::LinearGeneral); });

  const bool general_greedy = sharpened_general && method == Method::SharpenedGeneral;
  gated(general_greedy, linear_ok, "general_sigma_recursion", [&] {
    InequalityReport q{"general_sigma_recursion", CheckStatus::Pass, "", {}};
    const double factor = 1.0 - mu / (2.0 * d * lip);
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
      const auto& a = recs[i];
      const auto& b = recs[i + 1];
      if (!a.sigma || !b.sigma || !a.theta_local || !a.lambda) {
        continue;
      }
      const double rho = 1.0 + big_m * *a.lambda / 2.0;
      const double rhs = factor * (std::pow(rho, 4) * (*a.sigma + 4.0 * big_m * d * *a.lambda) -
                                   0.25 * *a.theta_local * *a.theta_local);
      q.entries.push_back(judge(a.t, rhs - *b.sigma, kAbsTolerance));
    }
    return q;
  });
  gated(general_greedy, linear_ok, "general_theta_sum", [&] {
    if (recs.empty() || !recs.front().sigma) {
      return InequalityReport{"general_theta_sum", CheckStatus::NotEvaluated, "sigma_0 missing", {}};
    }
    const double bound = 8.0 * (*recs.front().sigma + 4.0 * big_m * d * ctx.lambda0);
    return theta_sum_check(ctx, "general_theta_sum", mu / (2.0 * d * lip), bound, true);
  });
  gated(general_greedy, superlinear_ok, "general_superlinear_envelope",
        [&] { return envelope_check(ctx, "general_superlinear_envelope", EnvelopeKind::SuperlinearGeneral); });
  gated(sharpened_general && method == Method::SharpenedRandomized, superlinear_ok, "randomized_superlinear_envelope",
        [&] { return envelope_check(ctx, "randomized_superlinear_envelope", EnvelopeKind::SuperlinearRandomized); });

  for (auto& q : out) {
    finalize(q);
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const CertificationReport& report) {
  nlohmann::ordered_json j;
  j["method"] = report.method;
  j["problem_kind"] = report.problem_kind;
  j["all_pass"] = report.all_pass();
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& q : report.inequalities) {
    nlohmann::ordered_json item;
    item["name"] = q.name;
    item["status"] = to_string(q.status);
    item["note"] = q.note;
    item["checked"] = q.entries.size();
    item["passed"] = q.count(CheckStatus::Pass);
    item["failed"] = q.count(CheckStatus::Fail);
    item["hypothesis_failed"] = q.count(CheckStatus::HypothesisFailed);
    item["not_evaluated"] = q.count(CheckStatus::NotEvaluated);
    double worst = std::numeric_limits<double>::infinity();
    nlohmann::ordered_json violations = nlohmann::ordered_json::array();
    for (const auto& e : q.entries) {
      if (e.status == CheckStatus::Pass || e.status == CheckStatus::Fail) {
        worst = std::min(worst, e.slack + e.tolerance);
      }
      if (e.status == CheckStatus::Fail) {
        violations.push_back({{"t", e.t}, {"slack", e.slack}, {"tolerance", e.tolerance}});
      }
    }
    item["min_margin"] = std::isfinite(worst) ? nlohmann::ordered_json(worst) : nlohmann::ordered_json(nullptr);
    item["violations"] = std::move(violations);
    list.push_back(std::move(item));
  }
  j["inequalities"] = std::move(list);
  return j;
}

}  // namespace sharpbfgs

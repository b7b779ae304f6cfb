#pragma once

// Quick property checks bundled into the CLI so an installed binary can vouch
// for itself. The unit tests cover the same ground more thoroughly.

#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sharpbfgs/analysis.hpp"
#include "sharpbfgs/io.hpp"

namespace sharpbfgs::selftest {

struct Outcome {
  bool ok;
  std::string detail;
};

struct Property {
  const char* name;
  std::function<Outcome()> check;
};

namespace detail {

inline Matrix random_spd(Index d, std::mt19937_64& eng) {
  const Matrix b = sharpbfgs::detail::gaussian_matrix(d, d, eng);
  Matrix m = b * b.transpose() / static_cast<double>(d) + 0.5 * Matrix::Identity(d, d);
  return 0.5 * (m + m.transpose());
}

/// A random G with A <= G: A plus a PSD perturbation.
inline Matrix dominating(const Matrix& a, std::mt19937_64& eng) {
  const Matrix b = sharpbfgs::detail::gaussian_matrix(a.rows(), a.rows(), eng);
  return a + 0.3 * b * b.transpose();
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

inline std::vector<Property> properties() {
  using detail::num;
  std::vector<Property> props;

  props.push_back({"bfgs-secant-and-ordering", [] {
    std::mt19937_64 eng(101);
    double worst_secant = 0.0, worst_order = 0.0;
    for (int k = 0; k < 300; ++k) {
      const Index d = 2 + k % 9;
      const Matrix a = detail::random_spd(d, eng);
      HessianApproxState st(detail::dominating(a, eng));
      const Vector u = sharpbfgs::detail::gaussian_matrix(d, 1, eng).col(0);
      if (bfgs_update(st, a * u, u) != UpdateStatus::Applied) return Outcome{false, "update not applied"};
      worst_secant = std::max(worst_secant, (st.g() * u - a * u).norm() / (a * u).norm());
      const auto range = generalized_eig_range(st.g_spd(), SpdMatrix(a));
      worst_order = std::max(worst_order, 1.0 - range.lo);
    }
    return Outcome{worst_secant < 1e-10 && worst_order < 1e-9,
                   "secant " + num(worst_secant) + ", order " + num(worst_order)};
  }});

  props.push_back({"greedy-sigma-factor", [] {
    std::mt19937_64 eng(202);
    double worst = -1e300;
    for (int k = 0; k < 300; ++k) {
      const Index d = 2 + k % 9;
      const Matrix a = detail::random_spd(d, eng);
      const EigenRange r = eig_range(a);
      HessianApproxState st(detail::dominating(a, eng));
      const SpdMatrix as(a);
      const double before = sigma(as, st.g());
      greedy_update(st, DirectionQuery{a.diagonal(), [&](Index i) { return Vector(a.col(i)); }});
      const double bound = (1.0 - r.lo / (static_cast<double>(d) * r.hi)) * before;
      worst = std::max(worst, sigma(as, st.g()) - bound);
    }
    return Outcome{worst <= 1e-9, "max excess " + num(worst)};
  }});

  props.push_back({"inverse-tracking", [] {
    std::mt19937_64 eng(303);
    const Index d = 20;
    const Matrix a = detail::random_spd(d, eng);
    HessianApproxState st = HessianApproxState::scaled_identity(d, eig_range(a).hi);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Vector u = sharpbfgs::detail::gaussian_matrix(d, 1, eng).col(0);
      bfgs_update(st, a * u, u);
      worst = std::max(worst, st.inverse_drift());
    }
    return Outcome{worst <= 1e-7 * std::sqrt(static_cast<double>(d)), "max drift " + num(worst)};
  }});

  props.push_back({"quadratic-runs-certify", [] {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const QuadraticOracle o(synth_quadratic(15, 50.0, seed));
      for (Method m : {Method::BFGS, Method::GreedyBFGS, Method::SharpenedQuadratic}) {
        SolverConfig c;
        c.method = m;
        c.record_timing = false;
        const CertificationReport rep = certify_run(run_solver(o, default_x0(15), c));
        if (!rep.all_pass()) return Outcome{false, to_string(m) + " seed " + std::to_string(seed)};
      }
    }
    return Outcome{true, "9 runs"};
  }});

  props.push_back({"logistic-gradient", [] {
    const LogisticOracle o(synth_logistic(200, 6, 404, 1e-3));
    std::mt19937_64 eng(404);
    const Vector x = sharpbfgs::detail::gaussian_matrix(6, 1, eng).col(0);
    const Vector g = o.gradient(x);
    Vector fd(6);
    const double h = 1e-5;
    for (Index i = 0; i < 6; ++i) {
      Vector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      fd(i) = (o.value(xp) - o.value(xm)) / (2 * h);
    }
    const double rel = (fd - g).norm() / g.norm();
    return Outcome{rel <= 1e-5, "rel err " + num(rel)};
  }});

  props.push_back({"superlinear-envelope-threshold", [] {
    const RateEnvelope e{EnvelopeKind::SuperlinearQuadCase, ProblemConstants{1.0, 10.0, 0.0, 10}, 1.0};
    const double v = envelope_value(e, 100).log_value;
    return Outcome{v <= 0.0, "log value at d*kappa " + num(v)};
  }});

  props.push_back({"libsvm-round-trip", [] {
    const Dataset ds = synth_logistic_dataset(50, 7, 505);
    std::stringstream buf;
    write_libsvm(ds, buf);
    const Dataset back = parse_libsvm(buf, "x", ds.dim());
    return Outcome{back.rows == ds.rows && back.labels == ds.labels, "50 rows"};
  }});

  props.push_back({"trace-round-trip", [] {
    const QuadraticOracle o(synth_quadratic(8, 20.0, 606));
    SolverConfig c;
    c.method = Method::SharpenedQuadratic;
    c.record_timing = false;
    RunResult r = run_solver(o, default_x0(8), c);
    std::stringstream first;
    write_trace_csv(r, first);
    r.records = read_trace_csv(first);
    std::stringstream second;
    write_trace_csv(r, second);
    return Outcome{first.str() == second.str(), std::to_string(r.records.size()) + " records"};
  }});

  return props;
}

/// Runs every property, printing one line each. Returns the number of failures.
inline int run_all(std::FILE* out) {
  int failures = 0;
  for (const auto& p : properties()) {
    Outcome o{false, ""};
    try {
      o = p.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::fprintf(out, "%s %-32s %s\n", o.ok ? "pass" : "FAIL", p.name, o.detail.c_str());
    failures += o.ok ? 0 : 1;
  }
  return failures;
}

}  // namespace sharpbfgs::selftest

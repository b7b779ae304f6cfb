// sharpbfgs command line: run experiments, re-certify traces, sweep quadratic
// grids and run the bundled self test.
//
// Exit codes: 0 success, 1 certification failure, 2 usage or input error.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selftest.hpp"
#include "sharpbfgs/analysis.hpp"
#include "sharpbfgs/io.hpp"

namespace {

using namespace sharpbfgs;

constexpr int kOk = 0;
constexpr int kCertFail = 1;
constexpr int kUsage = 2;

struct RunArgs {
  std::string config;
  std::vector<std::string> methods;
  std::optional<std::string> problem, dataset, data_dir, data_path, correction, diagnostics, out, envelopes;
  std::optional<double> mu, kappa, m;
  std::optional<long> seed, max_iters, d, n;
  bool timing = false;
  bool no_certify = false;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

int cmd_run(const RunArgs& a) {
  KeyValues kv = a.config.empty() ? KeyValues{} : parse_config(fs::path(a.config));
  auto set = [&](const char* key, const auto& v) {
    if (v) {
      if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>) {
        kv[key] = *v;
      } else {
        kv[key] = sharpbfgs::detail::fmt(static_cast<double>(*v));
      }
    }
  };
  // --dataset on its own implies a LIBSVM problem even if the config file said otherwise.
  if ((a.dataset || a.data_path) && !a.problem) kv["problem"] = "libsvm";
  set("problem", a.problem);
  set("dataset", a.dataset);
  set("data_dir", a.data_dir);
  set("data_path", a.data_path);
  set("mu", a.mu);
  set("M", a.m);
  set("kappa", a.kappa);
  set("correction", a.correction);
  set("diagnostics", a.diagnostics);
  set("envelopes", a.envelopes);
  set("out", a.out);
  if (a.seed) kv["seed"] = std::to_string(*a.seed);
  if (a.max_iters) kv["max_iters"] = std::to_string(*a.max_iters);
  if (a.d) kv["d"] = std::to_string(*a.d);
  if (a.n) kv["n"] = std::to_string(*a.n);
  if (!a.methods.empty()) kv["methods"] = join(a.methods);
  if (a.timing) kv["timing"] = "on";
  if (a.no_certify) kv["certify"] = "off";

  const ExperimentSpec spec = spec_from_config(kv);
  const ExperimentResult res = run_experiment(spec);
  std::printf("%-20s %-16s %8s %14s  %s\n", "method", "terminal", "iters", "lambda/lambda0", "certified");
  for (const auto& o : res.outcomes) {
    const double l0 = o.run.lambda0();
    const auto& last = o.run.records.back();
    const double ratio = (last.lambda && l0 > 0.0) ? *last.lambda / l0 : 0.0;
    const char* cert = !o.report ? "-" : o.report->all_pass() ? "yes" : "NO";
    std::printf("%-20s %-16s %8ld %14s  %s\n", to_string(o.method).c_str(), to_string(o.run.terminal_reason).c_str(),
                o.run.iterations(), num(ratio).c_str(), cert);
    if (o.report && !o.report->all_pass()) {
      for (const auto& q : o.report->inequalities) {
        if (q.status == CheckStatus::Fail) std::printf("    failed: %s\n", q.name.c_str());
      }
    }
  }
  std::printf("artifacts in %s\n", spec.out_dir.string().c_str());
  return res.all_certified() ? kOk : kCertFail;
}

std::vector<fs::path> trace_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (fs::exists(root / "trace.csv")) {
    dirs.push_back(root);
    return dirs;
  }
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / "trace.csv")) dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

int cmd_certify(const std::string& dir, bool json) {
  const auto dirs = trace_dirs(dir);
  if (dirs.empty()) {
    std::fprintf(stderr, "certify: no trace.csv under %s\n", dir.c_str());
    return kUsage;
  }
  bool all_ok = true;
  for (const auto& d : dirs) {
    std::ifstream js(d / "summary.json");
    if (!js) throw Error(ErrorCode::InvalidArgument, "missing summary.json in " + d.string());
    const auto summary = nlohmann::ordered_json::parse(js);
    std::ifstream csv(d / "trace.csv");
    const RunResult run = run_from_summary(summary, read_trace_csv(csv));
    const CertificationReport rep = certify_run(run);
    all_ok = all_ok && rep.all_pass();
    if (json) {
      std::cout << to_json(rep).dump(2) << '\n';
      continue;
    }
    std::printf("%s: %s\n", d.string().c_str(), rep.all_pass() ? "pass" : "FAIL");
    for (const auto& q : rep.inequalities) {
      if (q.status == CheckStatus::NotApplicable) continue;
      std::printf("  %-28s %-16s", q.name.c_str(), to_string(q.status).c_str());
      if (q.status == CheckStatus::Fail) {
        std::size_t failed = 0;
        long first = -1;
        for (const auto& e : q.entries) {
          if (e.status == CheckStatus::Fail) {
            if (first < 0) first = e.t;
            ++failed;
          }
        }
        std::printf(" %zu violations, first at t=%ld", failed, first);
      } else if (!q.note.empty()) {
        std::printf(" %s", q.note.c_str());
      }
      std::printf("\n");
    }
  }
  return all_ok ? kOk : kCertFail;
}

struct BenchArgs {
  std::vector<long> dims{20, 50};
  std::vector<double> kappas{10, 100};
  std::vector<std::string> methods{"bfgs", "greedy", "sharpened-quadratic"};
  long seeds = 1;
  long max_iters = 2000;
  double ratio = 1e-10;
  bool timing = false;
};

int cmd_bench(const BenchArgs& b) {
  std::vector<Method> methods;
  for (const auto& name : b.methods) {
    const auto m = parse_method(name);
    if (!m) {
      std::fprintf(stderr, "bench: unknown method '%s'\n", name.c_str());
      return kUsage;
    }
    methods.push_back(*m);
  }
  std::printf("d,kappa,seed,method,terminal_reason,iterations,iters_to_ratio,final_ratio%s\n",
              b.timing ? ",wall_ms" : "");
  for (long d : b.dims) {
    for (double kappa : b.kappas) {
      for (long seed = 1; seed <= b.seeds; ++seed) {
        const QuadraticOracle o(synth_quadratic(d, kappa, static_cast<std::uint64_t>(seed)));
        for (Method m : methods) {
          SolverConfig c;
          c.method = m;
          c.max_iters = static_cast<int>(b.max_iters);
          c.diagnostics = Diagnostics::Off;
          c.record_timing = false;
          c.tol_lambda = 0.0;
          const auto start = std::chrono::steady_clock::now();
          const RunResult r = run_solver(o, default_x0(d), c);
          const double ms =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
          const auto hit = iterations_to_ratio(r, b.ratio);
          const auto& last = r.records.back();
          const double final_ratio = last.lambda && r.lambda0() > 0 ? *last.lambda / r.lambda0() : 0.0;
          std::printf("%ld,%s,%ld,%s,%s,%ld,%s,%s", d, sharpbfgs::detail::fmt(kappa).c_str(), seed,
                      to_string(m).c_str(), to_string(r.terminal_reason).c_str(), r.iterations(),
                      hit ? std::to_string(*hit).c_str() : "", sharpbfgs::detail::fmt(final_ratio).c_str());
          if (b.timing) std::printf(",%.3f", ms);
          std::printf("\n");
        }
      }
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpened BFGS experiments and certification"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file and flags");
  run_cmd->add_option("config", run.config, "key = value config file")->check(CLI::ExistingFile);
  run_cmd->add_option("--method,-m", run.methods, "method(s): gd, bfgs, greedy, sharpened-quadratic, sharpened, "
                                                  "sharpened-random or all")
      ->delimiter(',');
  run_cmd->add_option("--problem", run.problem, "quadratic, logistic or libsvm");
  run_cmd->add_option("--dataset", run.dataset, "LIBSVM file name under --data-dir or QN_DATA_DIR");
  run_cmd->add_option("--data-dir", run.data_dir, "directory holding LIBSVM files");
  run_cmd->add_option("--data-path", run.data_path, "explicit LIBSVM file");
  run_cmd->add_option("--mu", run.mu, "l2 regularization");
  run_cmd->add_option("--M", run.m, "self-concordance constant override");
  run_cmd->add_option("--seed", run.seed, "problem seed (also the solver RNG seed)");
  run_cmd->add_option("--d", run.d, "dimension for synthetic problems");
  run_cmd->add_option("--n", run.n, "samples for synthetic logistic problems");
  run_cmd->add_option("--kappa", run.kappa, "condition number for synthetic quadratics");
  run_cmd->add_option("--correction", run.correction, "on or off")->check(CLI::IsMember({"on", "off"}));
  run_cmd->add_option("--max-iters", run.max_iters, "iteration budget");
  run_cmd->add_option("--diagnostics", run.diagnostics, "off, basic or full")
      ->check(CLI::IsMember({"off", "basic", "full"}));
  run_cmd->add_option("--envelopes", run.envelopes, "comma separated envelope names to plot");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_flag("--timing", run.timing, "record wall-clock per iteration (traces stop being reproducible)");
  run_cmd->add_flag("--no-certify", run.no_certify, "skip certification");

  std::string cert_dir;
  bool cert_json = false;
  auto* cert_cmd = app.add_subcommand("certify", "re-check the inequalities on recorded traces");
  cert_cmd->add_option("dir", cert_dir, "run directory or experiment directory")->required();
  cert_cmd->add_flag("--json", cert_json, "print the full report as JSON");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "sweep synthetic quadratics over (d, kappa)");
  bench_cmd->add_option("--d", bench.dims, "dimensions")->delimiter(',');
  bench_cmd->add_option("--kappa", bench.kappas, "condition numbers")->delimiter(',');
  bench_cmd->add_option("--method,-m", bench.methods, "methods")->delimiter(',');
  bench_cmd->add_option("--seeds", bench.seeds, "seeds 1..n per cell")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--max-iters", bench.max_iters, "iteration budget")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--ratio", bench.ratio, "target lambda_t / lambda_0");
  bench_cmd->add_flag("--timing", bench.timing, "add a wall_ms column");

  app.add_subcommand("selftest", "run the bundled property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*cert_cmd) return cmd_certify(cert_dir, cert_json);
    if (*bench_cmd) return cmd_bench(bench);
    return selftest::run_all(stdout) == 0 ? kOk : kCertFail;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
}

#pragma once

// LIBSVM ingestion, synthetic problems, trace CSV / summary JSON / SVG output,
// flat key=value configs and the experiment runner.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sharpbfgs/analysis.hpp"
#include "sharpbfgs/errors.hpp"
#include "sharpbfgs/objectives.hpp"
#include "sharpbfgs/solvers.hpp"

namespace sharpbfgs {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
  std::string name;
  Matrix rows;  // N x d, dense
  Vector labels;
  std::size_t dropped_rows = 0;  // zero rows removed by normalize_rows

  Index n_samples() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    out.push_back(cur);
  }
  if (!s.empty() && s.back() == sep) {
    out.emplace_back();
  }
  return out;
}

inline std::optional<double> to_double(const std::string& s) {
  if (s.empty()) {
    return std::nullopt;
  }
  const char* first = s.data();
  if (*first == '+') {
    ++first;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

inline std::optional<long> to_long(const std::string& s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

inline std::string fmt(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ParsedLine {
  std::size_t line;
  double label;
  std::vector<std::pair<long, double>> entries;
};

}  // namespace detail

/// Reads LIBSVM text ("label idx:val ..." with 1-based ascending indices).
/// Labels drawn from {0,1}, {1,2} or {-1,+1} are mapped onto {-1,+1}. Blank
/// lines and '#' comment lines are skipped.
inline Dataset parse_libsvm(std::istream& in, const std::string& name = "dataset",
                            std::optional<Index> dim_override = std::nullopt) {
  std::vector<detail::ParsedLine> lines;
  std::string raw;
  std::size_t line_no = 0;
  long max_index = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream tokens(line);
    std::string tok;
    tokens >> tok;
    const auto label = detail::to_double(tok);
    if (!label || !std::isfinite(*label)) {
      throw ParseError(line_no, "bad label '" + tok + "'");
    }
    detail::ParsedLine parsed{line_no, *label, {}};
    long prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) {
        throw ParseError(line_no, "expected index:value, got '" + tok + "'");
      }
      const auto idx = detail::to_long(tok.substr(0, colon));
      if (!idx || *idx < 1) {
        throw ParseError(line_no, "bad feature index '" + tok.substr(0, colon) + "'");
      }
      if (*idx <= prev) {
        throw ParseError(line_no, "feature indices must be strictly ascending");
      }
      const auto val = detail::to_double(tok.substr(colon + 1));
      if (!val || !std::isfinite(*val)) {
        throw ParseError(line_no, "bad feature value '" + tok.substr(colon + 1) + "'");
      }
      if (dim_override && *idx > *dim_override) {
        throw ParseError(line_no, "feature index " + std::to_string(*idx) + " exceeds dimension " +
                                      std::to_string(*dim_override));
      }
      prev = *idx;
      max_index = std::max(max_index, *idx);
      parsed.entries.emplace_back(*idx, *val);
    }
    lines.push_back(std::move(parsed));
  }
  if (lines.empty()) {
    throw Error(ErrorCode::EmptyDataset, name + ": no samples");
  }

  std::set<double> seen;
  for (const auto& l : lines) {
    seen.insert(l.label);
  }
  auto subset_of = [&](std::initializer_list<double> allowed) {
    return std::all_of(seen.begin(), seen.end(), [&](double v) {
      return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    });
  };
  double negative = -1.0;
  if (subset_of({-1.0, 1.0})) {
    negative = -1.0;
  } else if (subset_of({0.0, 1.0})) {
    negative = 0.0;
  } else if (subset_of({1.0, 2.0})) {
    negative = 1.0;
  } else {
    for (const auto& l : lines) {
      if (l.label != -1.0 && l.label != 0.0 && l.label != 1.0 && l.label != 2.0) {
        throw ParseError(l.line, "label outside {0,1}, {1,2} or {-1,+1}");
      }
    }
    throw ParseError(lines.front().line, "labels mix incompatible encodings");
  }

  const Index d = dim_override.value_or(static_cast<Index>(max_index));
  if (d == 0) {
    throw Error(ErrorCode::EmptyDataset, name + ": no features");
  }
  Dataset ds;
  ds.name = name;
  ds.rows = Matrix::Zero(static_cast<Index>(lines.size()), d);
  ds.labels.resize(static_cast<Index>(lines.size()));
  for (Index i = 0; i < ds.rows.rows(); ++i) {
    const auto& l = lines[static_cast<std::size_t>(i)];
    ds.labels(i) = l.label == negative ? -1.0 : 1.0;
    for (const auto& [idx, val] : l.entries) {
      ds.rows(i, idx - 1) = val;
    }
  }
  return ds;
}

inline Dataset parse_libsvm(const fs::path& path, std::optional<Index> dim_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  }
  return parse_libsvm(in, path.filename().string(), dim_override);
}

inline void write_libsvm(const Dataset& ds, std::ostream& out) {
  for (Index i = 0; i < ds.n_samples(); ++i) {
    out << (ds.labels(i) > 0 ? "+1" : "-1");
    for (Index j = 0; j < ds.dim(); ++j) {
      if (ds.rows(i, j) != 0.0) {
        out << ' ' << (j + 1) << ':' << detail::fmt(ds.rows(i, j));
      }
    }
    out << '\n';
  }
}

inline void write_libsvm(const Dataset& ds, const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  }
  write_libsvm(ds, out);
}

/// Scales every nonzero row to unit norm and drops zero rows.
inline Dataset normalize_rows(const Dataset& ds) {
  std::vector<Index> keep;
  for (Index i = 0; i < ds.n_samples(); ++i) {
    if (ds.rows.row(i).squaredNorm() > 0.0) {
      keep.push_back(i);
    }
  }
  Dataset out;
  out.name = ds.name;
  out.rows.resize(static_cast<Index>(keep.size()), ds.dim());
  out.labels.resize(static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Index i = keep[k];
    out.rows.row(static_cast<Index>(k)) = ds.rows.row(i) / ds.rows.row(i).norm();
    out.labels(static_cast<Index>(k)) = ds.labels(i);
  }
  out.dropped_rows = ds.dropped_rows + (static_cast<std::size_t>(ds.n_samples()) - keep.size());
  if (keep.empty()) {
    throw Error(ErrorCode::EmptyDataset, ds.name + ": every row is zero");
  }
  return out;
}

/// Published sizes and regularization for the recognised LIBSVM datasets.
struct DatasetInfo {
  const char* name;
  Index n_samples;
  Index dim;
  double mu;
};

inline constexpr DatasetInfo kKnownDatasets[] = {
    {"svmguide3", 1243, 21, 1e-2},  {"ijcnn1", 49990, 22, 1e-2},    {"phishing", 11055, 68, 1e-3},
    {"mushrooms", 8124, 112, 1e-3}, {"a9a", 32561, 123, 1e-3},      {"connect-4", 67557, 126, 1e-4},
    {"w8a", 49749, 300, 1e-4},      {"protein", 17766, 357, 1e-4},
};

inline std::optional<DatasetInfo> known_dataset(const std::string& name) {
  for (const auto& info : kKnownDatasets) {
    if (name == info.name) {
      return info;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Synthetic problems

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      m(i, j) = normal(engine);
    }
  }
  return m;
}

}  // namespace detail

/// A = Q^T D Q with Q from the QR of a Gaussian matrix and D log-uniform on
/// [1, kappa] with both ends pinned; b Gaussian.
inline QuadraticProblem synth_quadratic(Index d, double kappa, std::uint64_t seed) {
  if (d < 2 || !(kappa >= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "synth_quadratic needs d >= 2 and kappa >= 1");
  }
  std::mt19937_64 engine(seed);
  const Matrix gauss = detail::gaussian_matrix(d, d, engine);
  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ();
  const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (rr(j, j) < 0.0) {
      q.col(j) = -q.col(j);
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector diag(d);
  diag(0) = 1.0;
  diag(d - 1) = kappa;
  for (Index i = 1; i < d - 1; ++i) {
    diag(i) = std::exp(unit(engine) * std::log(kappa));
  }
  std::sort(diag.data(), diag.data() + d);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector b(d);
  for (Index i = 0; i < d; ++i) {
    b(i) = normal(engine);
  }
  Matrix a = kappa == 1.0 ? Matrix(Matrix::Identity(d, d))
                          : Matrix(q.transpose() * diag.asDiagonal() * q);
  return QuadraticProblem(SpdMatrix(std::move(a)), std::move(b), EigenRange{1.0, kappa});
}

/// Unit-norm Gaussian rows with per-feature scales decaying from 1 to 1/30 and
/// labels drawn from a planted logistic model.
inline Dataset synth_logistic_dataset(Index n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) {
    throw Error(ErrorCode::InvalidArgument, "synth_logistic needs N >= 1 and d >= 1");
  }
  std::mt19937_64 engine(seed);
  Matrix z = detail::gaussian_matrix(n, d, engine);
  for (Index j = 0; j < d; ++j) {
    const double frac = d > 1 ? static_cast<double>(j) / static_cast<double>(d - 1) : 0.0;
    z.col(j) *= std::pow(30.0, -frac);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(d);
  for (Index j = 0; j < d; ++j) {
    w(j) = normal(engine);
  }
  w *= 4.0 / w.norm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset ds;
  ds.name = "synthetic-logistic";
  ds.rows = std::move(z);
  ds.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    double norm = ds.rows.row(i).norm();
    if (norm == 0.0) {
      norm = 1.0;
    }
    const double p = 1.0 / (1.0 + std::exp(-ds.rows.row(i).dot(w) / norm));
    ds.labels(i) = unit(engine) < p ? 1.0 : -1.0;
  }
  return normalize_rows(ds);
}

inline LogisticProblem synth_logistic(Index n, Index d, std::uint64_t seed, double mu) {
  Dataset ds = synth_logistic_dataset(n, d, seed);
  return LogisticProblem(std::move(ds.rows), std::move(ds.labels), mu);
}

// ---------------------------------------------------------------------------
// Trace CSV

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {
      "t",           "f",           "grad_norm",   "lambda",      "sigma",           "theta",
      "r",           "wall_nanos",  "theta_local", "min_gen_eig", "max_gen_eig",     "update_gain",
      "secant_residual", "inverse_drift", "skipped"};
  return cols;
}

inline void write_trace_csv(const RunResult& run, std::ostream& out) {
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out << (i ? "," : "") << cols[i];
  }
  out << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? detail::fmt(*v) : std::string(); };
  for (const auto& r : run.records) {
    out << r.t << ',' << detail::fmt(r.f) << ',' << detail::fmt(r.grad_norm) << ',' << opt(r.lambda) << ','
        << opt(r.sigma) << ',' << opt(r.theta) << ',' << opt(r.r) << ',' << r.wall_nanos << ','
        << opt(r.theta_local) << ',' << opt(r.min_gen_eig) << ',' << opt(r.max_gen_eig) << ','
        << opt(r.update_gain) << ',' << opt(r.secant_residual) << ',' << opt(r.inverse_drift) << ','
        << (r.skipped_update ? 1 : 0) << '\n';
  }
}

inline std::vector<IterationRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(1, "empty trace");
  }
  const auto header = detail::split(detail::trim(line), ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    col[header[i]] = i;
  }
  for (const char* need : {"t", "f", "grad_norm"}) {
    if (!col.count(need)) {
      throw ParseError(1, std::string("trace lacks column ") + need);
    }
  }
  std::vector<IterationRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) {
      continue;
    }
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " cells");
    }
    auto cell = [&](const char* name) -> std::optional<std::string> {
      auto it = col.find(name);
      if (it == col.end() || cells[it->second].empty()) {
        return std::nullopt;
      }
      return cells[it->second];
    };
    auto number = [&](const char* name) -> std::optional<double> {
      const auto c = cell(name);
      if (!c) {
        return std::nullopt;
      }
      if (*c == "nan") return std::numeric_limits<double>::quiet_NaN();
      if (*c == "inf") return std::numeric_limits<double>::infinity();
      if (*c == "-inf") return -std::numeric_limits<double>::infinity();
      const auto v = detail::to_double(*c);
      if (!v) {
        throw ParseError(line_no, std::string("bad number in column ") + name);
      }
      return v;
    };
    IterationRecord r;
    const auto t = detail::to_long(cell("t").value_or(""));
    if (!t) {
      throw ParseError(line_no, "bad iteration index");
    }
    r.t = *t;
    r.f = number("f").value_or(std::numeric_limits<double>::quiet_NaN());
    r.grad_norm = number("grad_norm").value_or(std::numeric_limits<double>::quiet_NaN());
    r.lambda = number("lambda");
    r.sigma = number("sigma");
    r.theta = number("theta");
    r.r = number("r");
    r.wall_nanos = static_cast<std::int64_t>(detail::to_long(cell("wall_nanos").value_or("0")).value_or(0));
    r.theta_local = number("theta_local");
    r.min_gen_eig = number("min_gen_eig");
    r.max_gen_eig = number("max_gen_eig");
    r.update_gain = number("update_gain");
    r.secant_residual = number("secant_residual");
    r.inverse_drift = number("inverse_drift");
    r.skipped_update = cell("skipped").value_or("0") == "1";
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Summary JSON

inline nlohmann::ordered_json config_to_json(const SolverConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["max_iters"] = c.max_iters;
  j["tol_grad"] = c.tol_grad ? nlohmann::ordered_json(*c.tol_grad) : nlohmann::ordered_json(nullptr);
  j["tol_lambda"] = c.tol_lambda;
  j["correction"] = c.correction_enabled;
  j["rng_seed"] = c.rng_seed;
  j["diagnostics"] = to_string(c.diagnostics);
  j["diagnostics_stride"] = c.diagnostics_stride;
  j["quadrature_nodes"] = c.quadrature_nodes;
  return j;
}

inline SolverConfig config_from_json(const nlohmann::ordered_json& j) {
  SolverConfig c;
  const auto m = parse_method(j.at("method").get<std::string>());
  if (!m) {
    throw Error(ErrorCode::ParseError, "unknown method in summary");
  }
  c.method = *m;
  c.max_iters = j.at("max_iters").get<int>();
  if (!j.at("tol_grad").is_null()) {
    c.tol_grad = j.at("tol_grad").get<double>();
  }
  c.tol_lambda = j.at("tol_lambda").get<double>();
  c.correction_enabled = j.at("correction").get<bool>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.diagnostics = parse_diagnostics(j.at("diagnostics").get<std::string>()).value_or(Diagnostics::Basic);
  c.diagnostics_stride = j.at("diagnostics_stride").get<int>();
  c.quadrature_nodes = j.at("quadrature_nodes").get<int>();
  return c;
}

inline nlohmann::ordered_json summary_json(const RunResult& run, const CertificationReport* report) {
  nlohmann::ordered_json j;
  j["method"] = to_string(run.config.method);
  j["problem"] = {{"kind", run.problem.kind},
                  {"fingerprint", run.problem.fingerprint},
                  {"quadratic", run.problem.quadratic},
                  {"dim", run.problem.constants.dim},
                  {"mu", run.problem.constants.mu},
                  {"L", run.problem.constants.lip},
                  {"M", run.problem.constants.sc}};
  j["config"] = config_to_json(run.config);
  j["terminal_reason"] = to_string(run.terminal_reason);
  j["failure_message"] = run.failure_message;
  j["iterations"] = run.iterations();
  j["lambda0"] = run.lambda0();
  const auto& last = run.records.back();
  j["final"] = {{"f", last.f},
                {"grad_norm", last.grad_norm},
                {"lambda", last.lambda ? nlohmann::ordered_json(*last.lambda) : nlohmann::ordered_json(nullptr)}};
  if (report) {
    j["certification"] = to_json(*report);
  }
  return j;
}

/// Rebuilds a RunResult from a summary JSON and its trace records.
inline RunResult run_from_summary(const nlohmann::ordered_json& j, std::vector<IterationRecord> records) {
  RunResult run;
  run.records = std::move(records);
  run.config = config_from_json(j.at("config"));
  const auto& p = j.at("problem");
  run.problem.kind = p.at("kind").get<std::string>();
  run.problem.fingerprint = p.at("fingerprint").get<std::string>();
  run.problem.quadratic = p.at("quadratic").get<bool>();
  run.problem.constants = {p.at("mu").get<double>(), p.at("L").get<double>(), p.at("M").get<double>(),
                           p.at("dim").get<Index>()};
  run.terminal_reason =
      parse_terminal_reason(j.at("terminal_reason").get<std::string>()).value_or(TerminalReason::MaxIters);
  run.failure_message = j.value("failure_message", "");
  return run;
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (t, value)
  bool dashed = false;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void svg_panel(std::ostream& out, const std::vector<PlotSeries>& series, const std::string& ylabel,
                      double top, double width, double height) {
  constexpr double kFloor = 1e-16;
  const double left = 70, right = 160, pad_top = 20, pad_bottom = 40;
  double t_max = 1.0;
  double lo = 0.0, hi = -16.0;
  for (const auto& s : series) {
    for (const auto& [t, v] : s.points) {
      t_max = std::max(t_max, t);
      const double lv = std::log10(std::max(v, kFloor));
      hi = std::max(hi, lv);
      lo = std::min(lo, lv);
    }
  }
  hi = std::ceil(hi);
  lo = std::max(std::floor(lo), -16.0);
  if (hi <= lo) {
    hi = lo + 1;
  }
  const double pw = width - left - right;
  const double ph = height - pad_top - pad_bottom;
  auto px = [&](double t) { return left + pw * t / t_max; };
  auto py = [&](double v) {
    const double lv = std::clamp(std::log10(std::max(v, kFloor)), lo, hi);
    return top + pad_top + ph * (hi - lv) / (hi - lo);
  };
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#333\"/>\n", left,
                top + pad_top, pw, ph);
  out << buf;
  const int step = hi - lo > 8 ? 2 : 1;
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); e += step) {
    const double y = py(std::pow(10.0, e));
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">1e%d</text>\n",
                  left, y, left + pw, y, left - 6, y + 4, e);
    out << buf;
  }
  for (int k = 0; k <= 5; ++k) {
    const double t = t_max * k / 5.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%.0f</text>\n",
                  px(t), top + pad_top + ph + 16, t);
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">iteration t</text>\n"
                "<text x=\"14\" y=\"%.1f\" font-size=\"12\" transform=\"rotate(-90 14 %.1f)\" "
                "text-anchor=\"middle\">",
                left + pw / 2, top + pad_top + ph + 34, top + pad_top + ph / 2, top + pad_top + ph / 2);
  out << buf << xml_escape(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    if (s.points.empty()) {
      continue;
    }
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << palette(i) << '"'
        << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (const auto& [t, v] : s.points) {
      if (t > t_max) {
        break;
      }
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(t), py(v));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" fill=\"%s\">", left + pw + 8,
                  top + pad_top + 14 + 16.0 * static_cast<double>(i), palette(i));
    out << buf << xml_escape(s.label) << "</text>\n";
  }
}

}  // namespace detail

/// One or two stacked log-scale panels; values are floored at 1e-16.
inline void write_svg(std::ostream& out, const std::string& title, const std::vector<PlotSeries>& top,
                      const std::string& top_label, const std::vector<PlotSeries>& bottom = {},
                      const std::string& bottom_label = "") {
  const double width = 720, panel = 320;
  const double height = 30 + panel * (bottom.empty() ? 1 : 2);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
      << detail::xml_escape(title) << "</text>\n";
  detail::svg_panel(out, top, top_label, 30, width, panel);
  if (!bottom.empty()) {
    detail::svg_panel(out, bottom, bottom_label, 30 + panel, width, panel);
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Config

using KeyValues = std::map<std::string, std::string>;

/// Flat "key = value" lines; '#' starts a comment.
inline KeyValues parse_config(std::istream& in) {
  KeyValues kv;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(line_no, "expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) {
      throw ParseError(line_no, "empty key");
    }
    kv[key] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::InvalidArgument, "cannot open config " + path.string());
  }
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Experiments

struct LibsvmSource {
  fs::path path;
  std::string name;
};
struct QuadraticSource {
  Index d = 100;
  double kappa = 100.0;
  std::uint64_t seed = 1;
};
struct LogisticSource {
  Index n = 1000;
  Index d = 30;
  std::uint64_t seed = 7;
};
using ProblemSource = std::variant<LibsvmSource, QuadraticSource, LogisticSource>;

struct ExperimentSpec {
  ProblemSource source = QuadraticSource{};
  std::optional<double> mu_reg;
  std::optional<double> self_concordance;  // overrides the logistic default M
  std::vector<Method> methods;
  bool all_methods = false;  // every method that applies to the problem, in enum order
  SolverConfig base;
  std::vector<EnvelopeKind> envelopes;
  fs::path out_dir = "out";
  bool certify = true;

  void validate() const {
    if (methods.empty() && !all_methods) {
      throw Error(ErrorCode::InvalidArgument, "experiment needs at least one method");
    }
    if (out_dir.empty()) {
      throw Error(ErrorCode::InvalidArgument, "experiment needs an output directory");
    }
    base.validate();
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::InvalidArgument, key + ": expected on/off, got '" + v + "'");
}

inline double parse_num(const std::string& key, const std::string& v) {
  const auto d = to_double(v);
  if (!d) {
    throw Error(ErrorCode::InvalidArgument, key + ": expected a number, got '" + v + "'");
  }
  return *d;
}

inline long parse_int(const std::string& key, const std::string& v) {
  const auto n = to_long(v);
  if (!n) {
    throw Error(ErrorCode::InvalidArgument, key + ": expected an integer, got '" + v + "'");
  }
  return *n;
}

inline std::vector<std::string> list(const std::string& v) {
  std::vector<std::string> out;
  for (auto& item : split(v, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

}  // namespace detail

/// Builds a spec from config keys. Unknown keys are rejected.
///
/// Keys: problem (quadratic | logistic | libsvm), dataset, data_path, data_dir,
/// d, kappa, n, seed, mu, M, methods, max_iters, tol_grad, tol_lambda,
/// correction, diagnostics, diagnostics_stride, quadrature_nodes, rng_seed,
/// timing, envelopes, certify, out.
inline ExperimentSpec spec_from_config(const KeyValues& kv) {
  using namespace detail;
  static const std::set<std::string> known = {
      "problem", "dataset", "data_path", "data_dir", "d", "kappa", "n", "seed", "mu", "M", "methods",
      "max_iters", "tol_grad", "tol_lambda", "correction", "diagnostics", "diagnostics_stride",
      "quadrature_nodes", "rng_seed", "timing", "envelopes", "certify", "out"};
  for (const auto& [k, v] : kv) {
    if (!known.count(k)) {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + k + "'");
    }
  }
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    auto it = kv.find(k);
    return it == kv.end() ? std::nullopt : std::optional<std::string>(it->second);
  };

  ExperimentSpec spec;
  spec.base.record_timing = false;
  const std::uint64_t seed = get("seed") ? static_cast<std::uint64_t>(parse_int("seed", *get("seed"))) : 1;

  std::string problem = get("problem").value_or(get("dataset") || get("data_path") ? "libsvm" : "quadratic");
  if (problem == "quadratic") {
    QuadraticSource q;
    q.seed = seed;
    if (auto v = get("d")) q.d = parse_int("d", *v);
    if (auto v = get("kappa")) q.kappa = parse_num("kappa", *v);
    spec.source = q;
  } else if (problem == "logistic") {
    LogisticSource l;
    l.seed = get("seed") ? seed : 7;
    if (auto v = get("n")) l.n = parse_int("n", *v);
    if (auto v = get("d")) l.d = parse_int("d", *v);
    spec.source = l;
  } else if (problem == "libsvm") {
    LibsvmSource s;
    s.name = get("dataset").value_or("");
    if (auto p = get("data_path")) {
      s.path = *p;
      if (s.name.empty()) {
        s.name = s.path.filename().string();
      }
    } else if (!s.name.empty()) {
      const char* env = std::getenv("QN_DATA_DIR");
      const fs::path dir = get("data_dir").value_or(env ? env : ".");
      s.path = dir / s.name;
    } else {
      throw Error(ErrorCode::InvalidArgument, "libsvm problem needs dataset or data_path");
    }
    spec.source = s;
  } else {
    throw Error(ErrorCode::InvalidArgument, "problem must be quadratic, logistic or libsvm");
  }

  if (auto v = get("mu")) spec.mu_reg = parse_num("mu", *v);
  if (auto v = get("M")) spec.self_concordance = parse_num("M", *v);
  if (auto v = get("methods")) {
    for (const auto& name : list(*v)) {
      if (name == "all") {
        spec.all_methods = true;
        continue;
      }
      const auto m = parse_method(name);
      if (!m) {
        throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
      }
      spec.methods.push_back(*m);
    }
  }
  if (auto v = get("max_iters")) spec.base.max_iters = static_cast<int>(parse_int("max_iters", *v));
  if (auto v = get("tol_grad")) spec.base.tol_grad = parse_num("tol_grad", *v);
  if (auto v = get("tol_lambda")) spec.base.tol_lambda = parse_num("tol_lambda", *v);
  if (auto v = get("correction")) spec.base.correction_enabled = parse_bool("correction", *v);
  if (auto v = get("diagnostics")) {
    const auto d = parse_diagnostics(*v);
    if (!d) {
      throw Error(ErrorCode::InvalidArgument, "diagnostics must be off, basic or full");
    }
    spec.base.diagnostics = *d;
  }
  if (auto v = get("diagnostics_stride")) {
    spec.base.diagnostics_stride = static_cast<int>(parse_int("diagnostics_stride", *v));
  }
  if (auto v = get("quadrature_nodes")) {
    spec.base.quadrature_nodes = static_cast<int>(parse_int("quadrature_nodes", *v));
  }
  spec.base.rng_seed = get("rng_seed") ? static_cast<std::uint64_t>(parse_int("rng_seed", *get("rng_seed"))) : seed;
  if (auto v = get("timing")) spec.base.record_timing = parse_bool("timing", *v);
  if (auto v = get("certify")) spec.certify = parse_bool("certify", *v);
  if (auto v = get("envelopes")) {
    for (const auto& name : list(*v)) {
      const auto e = parse_envelope(name);
      if (!e) {
        throw Error(ErrorCode::InvalidArgument, "unknown envelope '" + name + "'");
      }
      spec.envelopes.push_back(*e);
    }
  }
  if (auto v = get("out")) spec.out_dir = *v;
  return spec;
}

struct MethodOutcome {
  Method method;
  RunResult run;
  std::optional<CertificationReport> report;
};

struct ExperimentResult {
  std::vector<MethodOutcome> outcomes;
  fs::path plot_path;

  bool all_certified() const {
    return std::all_of(outcomes.begin(), outcomes.end(),
                       [](const MethodOutcome& o) { return !o.report || o.report->all_pass(); });
  }
};

/// An oracle built from a spec, with the dataset kept alive alongside it.
struct BuiltProblem {
  std::unique_ptr<ObjectiveOracle> oracle;
  std::string label;
};

inline BuiltProblem build_problem(const ExperimentSpec& spec) {
  BuiltProblem out;
  if (const auto* q = std::get_if<QuadraticSource>(&spec.source)) {
    out.oracle = std::make_unique<QuadraticOracle>(synth_quadratic(q->d, q->kappa, q->seed));
    out.label = "quadratic d=" + std::to_string(q->d) + " kappa=" + detail::fmt(q->kappa);
    return out;
  }
  Dataset ds;
  if (const auto* l = std::get_if<LogisticSource>(&spec.source)) {
    ds = synth_logistic_dataset(l->n, l->d, l->seed);
  } else {
    const auto& s = std::get<LibsvmSource>(spec.source);
    const auto info = known_dataset(s.name);
    ds = normalize_rows(parse_libsvm(s.path, info ? std::optional<Index>(info->dim) : std::nullopt));
    ds.name = s.name;
  }
  double mu = 0.0;
  if (spec.mu_reg) {
    mu = *spec.mu_reg;
  } else if (const auto info = known_dataset(ds.name)) {
    mu = info->mu;
  } else {
    throw Error(ErrorCode::InvalidArgument, "mu is required for dataset '" + ds.name + "'");
  }
  out.label = ds.name + " N=" + std::to_string(ds.n_samples()) + " d=" + std::to_string(ds.dim()) +
              " mu=" + detail::fmt(mu);
  out.oracle = std::make_unique<LogisticOracle>(LogisticProblem(std::move(ds.rows), std::move(ds.labels), mu),
                                                spec.self_concordance);
  return out;
}

/// Worker count for run-level parallelism: QN_THREADS, default 1.
inline unsigned experiment_threads() {
  if (const char* env = std::getenv("QN_THREADS")) {
    const auto n = detail::to_long(env);
    if (n && *n >= 1) {
      return static_cast<unsigned>(*n);
    }
  }
  return 1;
}

inline void write_run_artifacts(const MethodOutcome& o, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "trace.csv");
    write_trace_csv(o.run, csv);
  }
  std::ofstream js(dir / "summary.json");
  js << summary_json(o.run, o.report ? &*o.report : nullptr).dump(2) << '\n';
}

inline std::vector<PlotSeries> lambda_series(const std::vector<MethodOutcome>& outcomes,
                                             const std::vector<EnvelopeKind>& envelopes) {
  std::vector<PlotSeries> series;
  long t_max = 1;
  for (const auto& o : outcomes) {
    PlotSeries s{to_string(o.method), {}, false};
    const double l0 = o.run.lambda0();
    for (const auto& r : o.run.records) {
      if (r.lambda && l0 > 0.0) {
        s.points.emplace_back(static_cast<double>(r.t), *r.lambda / l0);
      }
    }
    t_max = std::max(t_max, o.run.iterations());
    series.push_back(std::move(s));
  }
  if (!outcomes.empty()) {
    const auto& c = outcomes.front().run.problem.constants;
    for (auto kind : envelopes) {
      PlotSeries s{"bound: " + to_string(kind), {}, true};
      const RateEnvelope env{kind, c, 1.0};
      for (long t = 1; t <= t_max; ++t) {
        s.points.emplace_back(static_cast<double>(t), envelope_value(env, t).value);
      }
      series.push_back(std::move(s));
    }
  }
  return series;
}

inline std::vector<PlotSeries> sigma_series(const std::vector<MethodOutcome>& outcomes) {
  std::vector<PlotSeries> series;
  for (const auto& o : outcomes) {
    if (o.method == Method::GD) {
      continue;
    }
    PlotSeries s{to_string(o.method), {}, false};
    for (const auto& r : o.run.records) {
      if (r.sigma) {
        s.points.emplace_back(static_cast<double>(r.t), *r.sigma);
      }
    }
    if (!s.points.empty()) {
      series.push_back(std::move(s));
    }
  }
  return series;
}

/// Runs each method from the shared default starting point, certifies it and
/// writes <out>/<method>/{trace.csv,summary.json}, <out>/experiment.json and
/// <out>/lambda.svg. Finished runs are flushed before an error propagates.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  fs::create_directories(spec.out_dir);
  const BuiltProblem problem = build_problem(spec);
  const Vector x0 = default_x0(problem.oracle->dim());
  std::vector<Method> methods = spec.methods;
  if (spec.all_methods) {
    methods.clear();
    for (Method m : kAllMethods) {
      if (m != Method::SharpenedQuadratic || problem.oracle->constant_hessian()) {
        methods.push_back(m);
      }
    }
  }

  ExperimentResult result;
  result.outcomes.resize(methods.size());
  std::vector<std::exception_ptr> errors(methods.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < methods.size(); i = next++) {
      try {
        SolverConfig cfg = spec.base;
        cfg.method = methods[i];
        MethodOutcome o{cfg.method, run_solver(*problem.oracle, x0, cfg), std::nullopt};
        if (spec.certify) {
          o.report = certify_run(o.run);
        }
        write_run_artifacts(o, spec.out_dir / to_string(o.method));
        result.outcomes[i] = std::move(o);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(experiment_threads(), static_cast<unsigned>(methods.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) {
      pool.emplace_back(worker);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  nlohmann::ordered_json summary;
  summary["problem"] = problem.label;
  summary["fingerprint"] = problem.oracle->fingerprint();
  summary["all_certified"] = result.all_certified();
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& o : result.outcomes) {
    runs.push_back({{"method", to_string(o.method)},
                    {"terminal_reason", to_string(o.run.terminal_reason)},
                    {"iterations", o.run.iterations()},
                    {"certified", !o.report || o.report->all_pass()}});
  }
  summary["runs"] = std::move(runs);
  std::ofstream(spec.out_dir / "experiment.json") << summary.dump(2) << '\n';

  result.plot_path = spec.out_dir / "lambda.svg";
  std::ofstream svg(result.plot_path);
  const bool quadratic = problem.oracle->constant_hessian();
  const auto sig = quadratic ? sigma_series(result.outcomes) : std::vector<PlotSeries>{};
  write_svg(svg, problem.label, lambda_series(result.outcomes, spec.envelopes), "lambda_t / lambda_0", sig,
            "sigma_t");
  return result;
}

}  // namespace sharpbfgs

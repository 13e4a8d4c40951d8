#pragma once

// Convergence experiments: N sweeps, fitted rates, CSV output and the
// runtime-versus-dimension report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgfbsde/benchmarks.hpp"
#include "sgfbsde/error.hpp"
#include "sgfbsde/multistep.hpp"

namespace sgfbsde {

struct ExperimentSpec {
  std::string problem = "example1";
  int k = 1;
  std::vector<int> N{8, 16, 32, 64, 128};
  int p = 0;   // 0 selects the problem's default level
  int pq = 0;  // 0 selects the problem's default level
  double tol = 1e-10;
  double T = 1.0;
  ErrorNormSpec norm;
  std::string output;  // CSV path, empty for none
  int threads = 1;
  bool timing = true;  // false writes runtime 0 so that output is reproducible byte for byte

  void validate() const {
    require(!N.empty(), "experiment needs at least one N");
    for (std::size_t i = 0; i < N.size(); ++i) {
      require(N[i] >= k, "every N must be at least k");
      require(i == 0 || N[i] > N[i - 1], "N list must be strictly increasing");
    }
    require(threads >= 1, "thread count must be positive");
    require(T > 0.0, "horizon must be positive");
  }
};

/// Interpolation and quadrature levels used by the reference tables.
inline std::pair<int, int> default_levels(const FbsdeProblem& prob, int k) {
  const std::string& n = prob.name;
  if (n == "example1") return {7, 3};
  if (n.rfind("example3", 0) == 0) {
    if (prob.q == 4 && k >= 3) return {5, 6};
    if (prob.q == 5 && k >= 2) return {6, 7};
  }
  return {prob.q + 1, prob.q + 1};
}

struct ConvergenceRow {
  int N = 0;
  double err_y = std::numeric_limits<double>::quiet_NaN();
  double err_z = std::numeric_limits<double>::quiet_NaN();
  double runtime_s = 0.0;
  bool ok = false;
  std::string failure;
  int max_picard = 0;
  double mean_picard = 0.0;
  std::size_t out_of_box = 0;
};

struct RateFit {
  double rate = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pairwise;  // log2-type rates between consecutive N
  bool reliable = false;         // at least three usable rows
};

/// Negated least-squares slope of log(error) against log(N). Rows with a
/// non-positive or non-finite error are skipped.
inline RateFit fit_rate(const std::vector<int>& N, const std::vector<double>& err) {
  require(N.size() == err.size(), "rate fit needs one error per N");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < N.size(); ++i)
    if (std::isfinite(err[i]) && err[i] > 0.0) {
      lx.push_back(std::log(static_cast<double>(N[i])));
      ly.push_back(std::log(err[i]));
    }
  RateFit fit;
  for (std::size_t i = 1; i < lx.size(); ++i) fit.pairwise.push_back(-(ly[i] - ly[i - 1]) / (lx[i] - lx[i - 1]));
  fit.reliable = lx.size() >= 3;
  if (lx.size() < 2) return fit;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  fit.rate = -sxy / sxx;
  return fit;
}

struct ExperimentResult {
  ExperimentSpec spec;  // with p and pq resolved
  std::vector<ConvergenceRow> rows;
  RateFit cr_y;
  RateFit cr_z;
};

inline ExperimentResult run_experiment(const ExperimentSpec& in) {
  in.validate();
  const auto prob = problem_by_id(in.problem, in.T);
  ExperimentResult res;
  res.spec = in;
  const auto [dp, dq] = default_levels(prob, in.k);
  if (res.spec.p == 0) res.spec.p = dp;
  if (res.spec.pq == 0) res.spec.pq = dq;

  std::vector<int> ok_n;
  std::vector<double> ey, ez;
  for (int N : in.N) {
    SolverConfig cfg;
    cfg.k = in.k;
    cfg.N = N;
    cfg.p = res.spec.p;
    cfg.pq = res.spec.pq;
    cfg.tol = in.tol;
    cfg.threads = in.threads;
    ConvergenceRow row;
    row.N = N;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const Solution sol = solve(prob, cfg);
      const auto t1 = std::chrono::steady_clock::now();
      const auto e = measure_errors(sol, prob, in.norm);
      row.err_y = e.e_y;
      row.err_z = e.e_z;
      row.runtime_s = in.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
      row.ok = true;
      double picard_sum = 0.0;
      for (const auto& d : sol.diagnostics) {
        row.max_picard = std::max(row.max_picard, d.max_picard);
        picard_sum += d.mean_picard;
        row.out_of_box += d.out_of_box;
      }
      if (!sol.diagnostics.empty()) row.mean_picard = picard_sum / static_cast<double>(sol.diagnostics.size());
      ok_n.push_back(N);
      ey.push_back(row.err_y);
      ez.push_back(row.err_z);
    } catch (const SolverDivergence& e) {
      row.failure = e.what();
    } catch (const NumericError& e) {
      row.failure = e.what();
    }
    res.rows.push_back(std::move(row));
  }
  res.cr_y = fit_rate(ok_n, ey);
  res.cr_z = fit_rate(ok_n, ez);
  return res;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* csv_header() { return "problem,k,p,pq,N,err_y,err_z,runtime_s,cr_y,cr_z"; }

namespace detail {

inline std::string sci(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

}  // namespace detail

inline std::string format_csv(const ExperimentResult& r) {
  if (r.rows.empty()) throw InvalidParameter("refusing to format an empty result table");
  std::ostringstream os;
  os << csv_header() << '\n';
  for (const auto& row : r.rows) {
    os << r.spec.problem << ',' << r.spec.k << ',' << r.spec.p << ',' << r.spec.pq << ',' << row.N << ','
       << detail::sci(row.err_y) << ',' << detail::sci(row.err_z) << ',' << detail::sci(row.runtime_s) << ','
       << detail::sci(r.cr_y.rate) << ',' << detail::sci(r.cr_z.rate) << '\n';
  }
  return os.str();
}

inline void emit_csv(const ExperimentResult& r, const std::string& path) {
  const std::string text = format_csv(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

struct CsvRecord {
  std::string problem;
  int k = 0, p = 0, pq = 0, N = 0;
  double err_y = 0.0, err_z = 0.0, runtime_s = 0.0, cr_y = 0.0, cr_z = 0.0;
};

inline std::vector<CsvRecord> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != csv_header()) throw IoError("CSV header does not match");
  auto num = [](const std::string& s) { return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s); };
  std::vector<CsvRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw IoError("CSV row has " + std::to_string(cells.size()) + " fields, expected 10");
    CsvRecord r;
    r.problem = cells[0];
    r.k = std::stoi(cells[1]);
    r.p = std::stoi(cells[2]);
    r.pq = std::stoi(cells[3]);
    r.N = std::stoi(cells[4]);
    r.err_y = num(cells[5]);
    r.err_z = num(cells[6]);
    r.runtime_s = num(cells[7]);
    r.cr_y = num(cells[8]);
    r.cr_z = num(cells[9]);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runtime versus dimension

struct ScalingRow {
  int q = 0;
  int p = 0;
  int pq = 0;
  std::size_t grid_points = 0;
  std::size_t quadrature_nodes = 0;
  std::size_t tensor_points = 0;  // full tensor grid of the finest 1D level
  double runtime_s = 0.0;
  double err_y = 0.0;
};

/// Runs `family:q=<q>` for each q at fixed N with the reference levels.
inline std::vector<ScalingRow> scaling_report(const std::string& family, const std::vector<int>& qs, int N, int k = 1,
                                              int threads = 1, double T = 1.0) {
  require(!qs.empty(), "scaling report needs at least one dimension");
  std::vector<ScalingRow> rows;
  for (int q : qs) {
    const auto prob = problem_by_id(family + ":q=" + std::to_string(q), T);
    const auto [p, pq] = default_levels(prob, k);
    SolverConfig cfg;
    cfg.k = k;
    cfg.N = N;
    cfg.p = p;
    cfg.pq = pq;
    cfg.threads = threads;
    ScalingRow row;
    row.q = q;
    row.p = p;
    row.pq = pq;
    row.grid_points = BasisIndexSet(q, p).size();
    row.quadrature_nodes = build_gh_rule(prob.d, pq).size();
    row.tensor_points = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(hier::level_size(p - q + 1)), static_cast<double>(q))));
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = solve(prob, cfg);
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.err_y = measure_errors(sol, prob).e_y;
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_scaling_csv(const std::string& family, int N, const std::vector<ScalingRow>& rows) {
  if (rows.empty()) throw InvalidParameter("refusing to format an empty scaling table");
  std::ostringstream os;
  os << "problem,q,p,pq,N,grid_points,quadrature_nodes,tensor_points,runtime_s,err_y\n";
  for (const auto& r : rows)
    os << family << ',' << r.q << ',' << r.p << ',' << r.pq << ',' << N << ',' << r.grid_points << ','
       << r.quadrature_nodes << ',' << r.tensor_points << ',' << detail::sci(r.runtime_s) << ','
       << detail::sci(r.err_y) << '\n';
  return os.str();
}

}  // namespace sgfbsde

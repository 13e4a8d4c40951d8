#pragma once

// Fully discrete k-step backward scheme on spectral sparse grids.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "sgfbsde/error.hpp"
#include "sgfbsde/parallel.hpp"
#include "sgfbsde/problem.hpp"
#include "sgfbsde/sparse_grid.hpp"
#include "sgfbsde/sparse_quadrature.hpp"

namespace sgfbsde {

using Rational = boost::rational<long long>;

/// alpha_{k,j} * dt, j = 0..k: the exact solution of the Vandermonde system
/// with rows sum_j j^m a_j = delta_{m,1}, m = 0..k (0^0 = 1), by
/// fraction-exact Gauss-Jordan elimination.
inline std::vector<Rational> multistep_weights_exact(int k) {
  require(k >= 1 && k <= 6, "multistep order k must be in 1..6");
  const auto n = static_cast<std::size_t>(k) + 1;
  std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n + 1));
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t j = 0; j < n; ++j) {
      long long v = 1;
      for (std::size_t e = 0; e < m; ++e) v *= static_cast<long long>(j);
      a[m][j] = Rational(v);
    }
    a[m][n] = Rational(m == 1 ? 1 : 0);
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    while (piv < n && a[piv][c].numerator() == 0) ++piv;
    if (piv == n) throw NumericError("singular multistep Vandermonde system");
    std::swap(a[c], a[piv]);
    const Rational inv = Rational(1) / a[c][c];
    for (auto& v : a[c]) v *= inv;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c].numerator() == 0) continue;
      const Rational f = a[r][c];
      for (std::size_t j = c; j <= n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<Rational> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = a[j][n];
  return out;
}

struct MultistepCoeffs {
  int k = 0;
  double dt = 0.0;
  std::vector<double> alpha;  // alpha_{k,0..k}, already divided by dt
};

inline MultistepCoeffs multistep_coeffs(int k, double dt) {
  require(dt > 0.0, "time step must be positive");
  const auto exact = multistep_weights_exact(k);
  MultistepCoeffs c{k, dt, {}};
  for (const auto& r : exact)
    c.alpha.push_back(boost::rational_cast<double>(r) / dt);
  return c;
}

struct TimeGrid {
  int N = 1;
  double T = 1.0;

  double dt() const { return T / N; }
  double t(int n) const { return n == N ? T : n * dt(); }
};

/// How C_b enters the box recursion. `symmetric` widens both bounds by
/// |C_b| dt (worst-case enclosure of a drift of unknown sign); `shift`
/// translates both bounds by +C_b dt as the recursion is usually printed.
enum class DriftEnclosure { symmetric, shift };

enum class Initialization { exact, bootstrap };

struct SolverConfig {
  int k = 1;
  int N = 8;
  int p = 3;   // interpolation level of C_q^p
  int pq = 3;  // quadrature level of G_d^pq
  std::vector<int> level_p;  // optional per-time-level interpolation levels, size N + 1
  double tol = 1e-10;
  int max_picard = 100;
  double inner_tol_factor = 0.1;
  int max_inner = 50;
  int threads = 1;
  std::optional<DomainSpec> domain;  // overrides the problem's domain metadata
  DriftEnclosure enclosure = DriftEnclosure::symmetric;
  Initialization init = Initialization::exact;
  int bootstrap_refine = 4;

  int interp_level(int n) const { return level_p.empty() ? p : level_p[static_cast<std::size_t>(n)]; }
};

/// Computational boxes for time levels 0..N.
inline std::vector<DomainBox> propagate_domains(const DomainSpec& spec, int N, double dt, double M,
                                                DriftEnclosure enclosure = DriftEnclosure::symmetric) {
  spec.initial.validate();
  require(N >= 1 && dt > 0.0 && M >= 0.0, "invalid domain propagation parameters");
  std::vector<DomainBox> boxes(static_cast<std::size_t>(N) + 1, spec.initial);
  if (spec.strategy == DomainStrategy::fixed) return boxes;
  require(spec.drift_bound >= 0.0 && spec.diffusion_bound >= 0.0, "coefficient bounds must be >= 0");
  const double spread = spec.diffusion_bound * std::sqrt(2.0 * dt) * M;
  const double drift = spec.drift_bound * dt;
  const double lo_step = enclosure == DriftEnclosure::shift ? drift - spread : -drift - spread;
  const double hi_step = drift + spread;
  for (std::size_t n = 1; n < boxes.size(); ++n) {
    boxes[n] = boxes[n - 1];
    for (auto& a : boxes[n].lower) a += lo_step;
    for (auto& b : boxes[n].upper) b += hi_step;
  }
  return boxes;
}

struct SolutionLevel {
  int n = 0;
  double t = 0.0;
  SparseGrid grid;
  std::vector<double> y_values;  // grid size x m
  std::vector<double> z_values;  // grid size x (m*d)
  SparseInterpolant y;
  SparseInterpolant z;
};

struct LevelDiagnostics {
  int n = 0;
  DomainBox domain;
  std::size_t points = 0;
  int max_picard = 0;
  double mean_picard = 0.0;
  std::size_t out_of_box = 0;
};

struct Solution {
  TimeGrid time;
  int k = 1;
  std::vector<std::optional<SolutionLevel>> levels;  // indexed by n = 0..N
  std::vector<LevelDiagnostics> diagnostics;          // backward-sweep levels, n descending

  const SolutionLevel& level(int n) const { return *levels.at(static_cast<std::size_t>(n)); }
};

namespace detail {

inline SolutionLevel make_level(int n, double t, SparseGrid grid, std::vector<double> yv, std::vector<double> zv,
                                int m, int d) {
  auto yi = fast_transform(grid, yv, m);
  auto zi = fast_transform(grid, zv, m * d);
  return SolutionLevel{n, t, std::move(grid), std::move(yv), std::move(zv), std::move(yi), std::move(zi)};
}

inline SolutionLevel exact_level(const FbsdeProblem& prob, int n, double t, SparseGrid grid, bool terminal) {
  const auto um = static_cast<std::size_t>(prob.m);
  const auto uz = static_cast<std::size_t>(prob.m * prob.d);
  std::vector<double> yv(grid.size() * um), zv(grid.size() * uz);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto x = grid.point(i);
    MutVec yo(yv.data() + i * um, um), zo(zv.data() + i * uz, uz);
    if (terminal)
      prob.terminal(x, yo);
    else
      prob.exact_y(t, x, yo);
    if (prob.exact_z)
      prob.exact_z(t, x, zo);
    else
      std::fill(zo.begin(), zo.end(), 0.0);
  }
  return make_level(n, t, std::move(grid), std::move(yv), std::move(zv), prob.m, prob.d);
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

/// Picard solve of one time level. future[j-1] is the level at t + j dt and
/// alpha holds alpha_{k,0..k} (divided by dt).
inline SolutionLevel step_level(const FbsdeProblem& prob, const SolverConfig& cfg, int n, double t, double dt,
                                std::span<const double> alpha, std::span<const SolutionLevel* const> future,
                                SparseGrid grid, const GhSparseRule& rule, LevelDiagnostics& diag) {
  const auto k = future.size();
  const auto uq = static_cast<std::size_t>(prob.q);
  const auto ud = static_cast<std::size_t>(prob.d);
  const auto um = static_cast<std::size_t>(prob.m);
  const auto uz = um * ud;
  const std::size_t npts = grid.size();
  std::vector<double> yv(npts * um), zv(npts * uz);
  std::vector<int> iterations(npts, 0);
  const int workers = std::max(cfg.threads, 1);
  std::vector<std::size_t> out_of_box(static_cast<std::size_t>(workers), 0);
  const bool periodic = cfg.domain ? cfg.domain->periodic : prob.domain.periodic;

  parallel_for(npts, workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
    ExpectationWorkspace ws;
    std::vector<ExpectationPair> e(k);
    std::vector<double> y(um), z(uz), y_new(um), z_new(uz), y_inner(um), f(um), rhs(um);
    std::vector<double> drift(uq), diffusion(uq * ud);
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = grid.point(i);
      future[0]->y.evaluate(x, y, ws.eval);
      future[0]->z.evaluate(x, z, ws.eval);
      int it = 0;
      while (true) {
        if (it == 0 || prob.coupled) {
          prob.drift(t, x, y, z, drift);
          prob.diffusion(t, x, y, z, diffusion);
          if (!all_finite(drift) || !all_finite(diffusion))
            throw NumericError("non-finite forward coefficients at time level " + std::to_string(n));
          for (std::size_t j = 0; j < k; ++j)
            expectation_from_coefficients(future[j]->y, x, drift, diffusion, static_cast<double>(j + 1) * dt, rule,
                                          periodic, e[j], ws);
        }
        std::fill(z_new.begin(), z_new.end(), 0.0);
        std::fill(rhs.begin(), rhs.end(), 0.0);
        for (std::size_t j = 0; j < k; ++j) {
          const double a = alpha[j + 1];
          for (std::size_t c = 0; c < uz; ++c) z_new[c] += a * e[j].eyw[c];
          for (std::size_t c = 0; c < um; ++c) rhs[c] -= a * e[j].ey[c];
        }
        // alpha_0 Y = rhs - f(t, x, Y, Z) is implicit in Y.
        y_inner = y;
        for (int inner = 0; inner < cfg.max_inner; ++inner) {
          prob.generator(t, x, y_inner, z_new, f);
          double change = 0.0, size = 1.0;
          for (std::size_t c = 0; c < um; ++c) {
            y_new[c] = (rhs[c] - f[c]) / alpha[0];
            change = std::max(change, std::abs(y_new[c] - y_inner[c]));
            size = std::max(size, std::abs(y_new[c]));
          }
          y_inner = y_new;
          if (change < cfg.tol * cfg.inner_tol_factor * size) break;
        }
        double residual = 0.0, scale = 1.0;
        for (std::size_t c = 0; c < um; ++c) {
          residual = std::max(residual, std::abs(y_new[c] - y[c]));
          scale = std::max(scale, std::abs(y_new[c]));
        }
        for (std::size_t c = 0; c < uz; ++c) {
          residual = std::max(residual, std::abs(z_new[c] - z[c]));
          scale = std::max(scale, std::abs(z_new[c]));
        }
        y = y_new;
        z = z_new;
        ++it;
        if (!all_finite(y) || !all_finite(z) || !std::isfinite(residual))
          throw NumericError("non-finite solution values at time level " + std::to_string(n));
        // Absolute for O(1) values, relative beyond, so the test stays above roundoff.
        if (residual < cfg.tol * scale) break;
        if (it >= cfg.max_picard) throw SolverDivergence(n, std::vector<double>(x.begin(), x.end()), residual);
      }
      std::copy(y.begin(), y.end(), yv.begin() + static_cast<std::ptrdiff_t>(i * um));
      std::copy(z.begin(), z.end(), zv.begin() + static_cast<std::ptrdiff_t>(i * uz));
      iterations[i] = it;
    }
    out_of_box[w] = ws.eval.out_of_box;
  });

  diag.n = n;
  diag.domain = grid.domain();
  diag.points = npts;
  diag.max_picard = npts ? *std::max_element(iterations.begin(), iterations.end()) : 0;
  double total = 0.0;
  for (int v : iterations) total += v;
  diag.mean_picard = npts ? total / static_cast<double>(npts) : 0.0;
  diag.out_of_box = 0;
  for (auto v : out_of_box) diag.out_of_box += v;
  return make_level(n, t, std::move(grid), std::move(yv), std::move(zv), prob.m, prob.d);
}

/// Levels N-1 .. N-k+1 from the 1-step scheme run with dt / refine, on the
/// boxes of the coarse levels.
inline void bootstrap_levels(const FbsdeProblem& prob, const SolverConfig& cfg, const TimeGrid& tg,
                             const std::vector<DomainBox>& boxes, const GhSparseRule& rule,
                             std::vector<std::optional<SolutionLevel>>& levels) {
  const int r = std::max(cfg.bootstrap_refine, 1);
  const double fine_dt = tg.dt() / r;
  const auto one_step = multistep_coeffs(1, fine_dt);
  SolutionLevel current = *levels[static_cast<std::size_t>(tg.N)];
  for (int s = 1; s <= (cfg.k - 1) * r; ++s) {
    const int coarse = tg.N - (s + r - 1) / r;  // coarse level at or above the fine time
    const double t = tg.T - s * fine_dt;
    SparseGrid grid(prob.q, cfg.interp_level(coarse), boxes[static_cast<std::size_t>(coarse)]);
    const SolutionLevel* fut[] = {&current};
    LevelDiagnostics diag;
    auto next = step_level(prob, cfg, coarse, t, fine_dt, one_step.alpha, fut, std::move(grid), rule, diag);
    current = std::move(next);
    if (s % r == 0) {
      current.n = coarse;
      current.t = tg.t(coarse);
      levels[static_cast<std::size_t>(coarse)] = current;
    }
  }
}

}  // namespace detail

inline void validate_config(const FbsdeProblem& prob, const SolverConfig& cfg) {
  require(cfg.k >= 1 && cfg.k <= 6, "multistep order k must be in 1..6");
  require(cfg.N >= cfg.k, "need N >= k time steps");
  require(cfg.tol > 0.0, "Picard tolerance must be positive");
  require(cfg.max_picard >= 1 && cfg.max_inner >= 1, "iteration limits must be positive");
  require(cfg.pq >= prob.d, "quadrature level must satisfy pq >= d");
  if (cfg.level_p.empty()) {
    require(cfg.p >= prob.q, "interpolation level must satisfy p >= q");
  } else {
    require(cfg.level_p.size() == static_cast<std::size_t>(cfg.N) + 1, "per-level p needs N + 1 entries");
    for (int v : cfg.level_p) require(v >= prob.q, "interpolation level must satisfy p >= q");
  }
}

/// Backward sweep n = N-k .. 0 of the k-step scheme; the first k levels come
/// from the exact solution (or the 1-step bootstrap).
inline Solution solve(const FbsdeProblem& prob, const SolverConfig& cfg) {
  prob.validate();
  validate_config(prob, cfg);
  const bool need_exact = cfg.init == Initialization::exact && cfg.k > 1;
  if (need_exact && !prob.exact_y) throw UnsupportedOperation("exact initialization needs an exact solution");

  Solution sol;
  sol.time = TimeGrid{cfg.N, prob.horizon};
  sol.k = cfg.k;
  const double dt = sol.time.dt();
  const auto coeffs = multistep_coeffs(cfg.k, dt);
  const auto rule = build_gh_rule(prob.d, cfg.pq);
  const DomainSpec spec = cfg.domain.value_or(prob.domain);
  const auto boxes = propagate_domains(spec, cfg.N, dt, rule.max_abs_node, cfg.enclosure);
  sol.levels.resize(static_cast<std::size_t>(cfg.N) + 1);

  auto grid_at = [&](int n) { return SparseGrid(prob.q, cfg.interp_level(n), boxes[static_cast<std::size_t>(n)]); };

  sol.levels[static_cast<std::size_t>(cfg.N)] = detail::exact_level(prob, cfg.N, sol.time.T, grid_at(cfg.N), true);
  if (cfg.init == Initialization::exact) {
    for (int i = 1; i < cfg.k; ++i) {
      const int n = cfg.N - i;
      sol.levels[static_cast<std::size_t>(n)] = detail::exact_level(prob, n, sol.time.t(n), grid_at(n), false);
    }
  } else {
    detail::bootstrap_levels(prob, cfg, sol.time, boxes, rule, sol.levels);
  }

  std::vector<const SolutionLevel*> future(static_cast<std::size_t>(cfg.k));
  for (int n = cfg.N - cfg.k; n >= 0; --n) {
    for (int j = 1; j <= cfg.k; ++j) future[static_cast<std::size_t>(j - 1)] = &*sol.levels[static_cast<std::size_t>(n + j)];
    LevelDiagnostics diag;
    sol.levels[static_cast<std::size_t>(n)] =
        detail::step_level(prob, cfg, n, sol.time.t(n), dt, coeffs.alpha, future, grid_at(n), rule, diag);
    sol.diagnostics.push_back(std::move(diag));
  }
  return sol;
}

enum class ErrorNorm { max, rms, point };

struct ErrorNormSpec {
  ErrorNorm kind = ErrorNorm::max;
  std::vector<double> point;  // used by ErrorNorm::point
  bool all_levels = false;    // max/rms over the grids of every time level instead of t = 0 only
};

struct ErrorReport {
  double e_y = 0.0;
  double e_z = 0.0;
};

/// Errors against the exact solution. `max`: largest absolute error over the
/// level-0 grid (largest component for Z); `rms`: root mean square of those
/// per-point errors; `point`: error of the t = 0 interpolants at one point.
/// With `all_levels`, max and rms run over the grids of every time level.
inline ErrorReport measure_errors(const Solution& sol, const FbsdeProblem& prob, const ErrorNormSpec& norm = {}) {
  if (!prob.has_exact()) throw UnsupportedOperation("error measurement needs the exact solution");
  const auto um = static_cast<std::size_t>(prob.m);
  const auto uz = static_cast<std::size_t>(prob.m * prob.d);
  std::vector<double> ye(um), ze(uz);
  auto point_errors = [&](double t, ConstVec x, ConstVec y, ConstVec z) {
    prob.exact_y(t, x, ye);
    prob.exact_z(t, x, ze);
    double ey = 0.0, ez = 0.0;
    for (std::size_t c = 0; c < um; ++c) ey = std::max(ey, std::abs(y[c] - ye[c]));
    for (std::size_t c = 0; c < uz; ++c) ez = std::max(ez, std::abs(z[c] - ze[c]));
    return std::pair{ey, ez};
  };

  ErrorReport r;
  if (norm.kind == ErrorNorm::point) {
    require(norm.point.size() == static_cast<std::size_t>(prob.q), "error point has the wrong dimension");
    const auto& lvl = sol.level(0);
    const auto y = lvl.y.evaluate(norm.point);
    const auto z = lvl.z.evaluate(norm.point);
    std::tie(r.e_y, r.e_z) = point_errors(lvl.t, norm.point, y, z);
    return r;
  }
  std::size_t count = 0;
  for (std::size_t n = 0; n < sol.levels.size(); ++n) {
    if (n > 0 && !norm.all_levels) break;
    if (!sol.levels[n]) continue;
    const auto& lvl = *sol.levels[n];
    const std::size_t npts = lvl.grid.size();
    for (std::size_t i = 0; i < npts; ++i) {
      const auto [ey, ez] = point_errors(lvl.t, lvl.grid.point(i), ConstVec(lvl.y_values.data() + i * um, um),
                                         ConstVec(lvl.z_values.data() + i * uz, uz));
      if (norm.kind == ErrorNorm::max) {
        r.e_y = std::max(r.e_y, ey);
        r.e_z = std::max(r.e_z, ez);
      } else {
        r.e_y += ey * ey;
        r.e_z += ez * ez;
      }
    }
    count += npts;
  }
  if (norm.kind == ErrorNorm::rms) {
    r.e_y = std::sqrt(r.e_y / static_cast<double>(count));
    r.e_z = std::sqrt(r.e_z / static_cast<double>(count));
  }
  return r;
}

}  // namespace sgfbsde

#pragma once

// Sparse Gauss-Hermite quadrature assembled with the combination formula,
// and the conditional expectations E[Y] and E[Y dW^T] it is used for.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "sgfbsde/basis1d.hpp"
#include "sgfbsde/error.hpp"
#include "sgfbsde/index_set.hpp"
#include "sgfbsde/problem.hpp"
#include "sgfbsde/sparse_grid.hpp"

namespace sgfbsde {

/// Flattened sparse rule for the weight exp(-|xi|^2) on R^q. Weights carry
/// the signed combination coefficients and sum to pi^(q/2).
struct GhSparseRule {
  int q = 0;
  int p = 0;
  std::vector<double> nodes;    // size() x q, row-major
  std::vector<double> weights;
  double max_abs_node = 0.0;    // M = max |xi|_inf over the nodes

  std::size_t size() const noexcept { return weights.size(); }
  std::span<const double> node(std::size_t i) const {
    const auto uq = static_cast<std::size_t>(q);
    return {nodes.data() + i * uq, uq};
  }
};

inline GhSparseRule build_gh_rule(int q, int p) {
  const auto levels = level_set(q, p);
  int top = 1;
  for (const auto& lv : levels.members)
    for (int l : lv.components()) top = std::max(top, l);
  std::vector<GhLevel> rules;
  for (int l = 1; l <= top; ++l) rules.push_back(gh_rule(l));

  // Identical nodes (the origin, and repeats across tensor levels that share
  // a 1D rule per coordinate) are merged; std::map fixes a deterministic order.
  std::map<std::vector<double>, double> merged;
  const auto uq = static_cast<std::size_t>(q);
  std::vector<double> xi(uq);
  std::vector<std::size_t> pos(uq);
  for (const auto& lv : levels.members) {
    if (lv.sum() <= p - q) continue;
    const double coef = combination_coefficient(q, p, lv);
    std::fill(pos.begin(), pos.end(), 0);
    while (true) {
      double w = coef;
      for (std::size_t m = 0; m < uq; ++m) {
        const auto& r = rules[static_cast<std::size_t>(lv[m] - 1)];
        xi[m] = r.nodes[pos[m]];
        w *= r.weights[pos[m]];
      }
      merged[xi] += w;
      std::size_t m = uq;
      while (m-- > 0) {
        if (++pos[m] < rules[static_cast<std::size_t>(lv[m] - 1)].nodes.size()) break;
        pos[m] = 0;
      }
      if (m == static_cast<std::size_t>(-1)) break;
    }
  }

  GhSparseRule rule;
  rule.q = q;
  rule.p = p;
  rule.nodes.reserve(merged.size() * uq);
  rule.weights.reserve(merged.size());
  for (const auto& [node, w] : merged) {
    rule.nodes.insert(rule.nodes.end(), node.begin(), node.end());
    rule.weights.push_back(w);
    for (double c : node) rule.max_abs_node = std::max(rule.max_abs_node, std::abs(c));
  }
  return rule;
}

/// Quadrature approximation of the integral of g(xi) exp(-|xi|^2) over R^q.
template <class G>
double integrate(const GhSparseRule& rule, G&& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * g(rule.node(i));
  return s;
}

struct ExpectationPair {
  std::vector<double> ey;   // m
  std::vector<double> eyw;  // m x d row-major
};

struct ExpectationWorkspace {
  EvalWorkspace eval;
  std::vector<double> drift, diffusion, point, value, increment;
};

inline double wrap_periodic(double x, double a, double b) {
  const double len = b - a;
  double r = std::fmod(x - a, len);
  if (r < 0.0) r += len;
  return a + r;
}

/// E[Y(x + b jdt + sigma dW)] and E[Y(...) dW^T] with dW = sqrt(2 jdt) xi,
/// for drift b (q) and diffusion sigma (q x d) already frozen at the
/// current point.
inline void expectation_from_coefficients(const SparseInterpolant& yq, ConstVec x, ConstVec drift,
                                          ConstVec diffusion, double jdt, const GhSparseRule& rule,
                                          bool periodic, ExpectationPair& out, ExpectationWorkspace& ws) {
  const auto uq = x.size();
  const auto ud = static_cast<std::size_t>(rule.q);
  const auto um = static_cast<std::size_t>(yq.value_dim());
  out.ey.assign(um, 0.0);
  out.eyw.assign(um * ud, 0.0);
  ws.point.resize(uq);
  ws.value.resize(um);
  ws.increment.resize(ud);
  const double scale = std::sqrt(2.0 * jdt);
  const auto& dom = yq.domain();

  for (std::size_t i = 0; i < rule.size(); ++i) {
    const auto xi = rule.node(i);
    for (std::size_t l = 0; l < ud; ++l) ws.increment[l] = scale * xi[l];
    for (std::size_t r = 0; r < uq; ++r) {
      double v = x[r] + drift[r] * jdt;
      for (std::size_t l = 0; l < ud; ++l) v += diffusion[r * ud + l] * ws.increment[l];
      if (periodic) v = wrap_periodic(v, dom.lower[r], dom.upper[r]);
      ws.point[r] = v;
    }
    yq.evaluate(ws.point, ws.value, ws.eval);
    const double w = rule.weights[i];
    for (std::size_t c = 0; c < um; ++c) {
      const double wv = w * ws.value[c];
      out.ey[c] += wv;
      for (std::size_t l = 0; l < ud; ++l) out.eyw[c * ud + l] += wv * ws.increment[l];
    }
  }
  const double norm = std::pow(std::numbers::pi, -0.5 * static_cast<double>(ud));
  for (double& v : out.ey) v *= norm;
  for (double& v : out.eyw) v *= norm;
}

/// Conditional expectations of Y^{n+j} given X_{t_n} = x, with the forward
/// coefficients frozen at (t_n, x, y, z).
inline ExpectationPair conditional_expectation(const SparseInterpolant& yq, ConstVec x, ConstVec y, ConstVec z,
                                               double t_n, double jdt, const FbsdeProblem& prob,
                                               const GhSparseRule& rule, ExpectationWorkspace& ws) {
  require(jdt > 0.0, "conditional expectation needs jdt > 0");
  require(rule.q == prob.d, "quadrature dimension must equal the Brownian dimension");
  require(static_cast<int>(x.size()) == prob.q, "state point has the wrong dimension");
  ws.drift.resize(static_cast<std::size_t>(prob.q));
  ws.diffusion.resize(static_cast<std::size_t>(prob.q * prob.d));
  prob.drift(t_n, x, y, z, ws.drift);
  prob.diffusion(t_n, x, y, z, ws.diffusion);
  for (double v : ws.drift)
    if (!std::isfinite(v)) throw NumericError("non-finite drift at the expectation base point");
  for (double v : ws.diffusion)
    if (!std::isfinite(v)) throw NumericError("non-finite diffusion at the expectation base point");
  ExpectationPair out;
  expectation_from_coefficients(yq, x, ws.drift, ws.diffusion, jdt, rule, prob.domain.periodic, out, ws);
  for (std::size_t i = 0; i < out.ey.size(); ++i)
    if (!std::isfinite(out.ey[i])) throw NumericError("non-finite conditional expectation");
  return out;
}

inline ExpectationPair conditional_expectation(const SparseInterpolant& yq, ConstVec x, ConstVec y, ConstVec z,
                                               double t_n, double jdt, const FbsdeProblem& prob,
                                               const GhSparseRule& rule) {
  ExpectationWorkspace ws;
  return conditional_expectation(yq, x, y, z, t_n, jdt, prob, rule, ws);
}

}  // namespace sgfbsde

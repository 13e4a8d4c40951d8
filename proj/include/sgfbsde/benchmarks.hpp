#pragma once

// Benchmark FBSDEs with closed-form solutions and checks that the printed
// coefficients really belong to those solutions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sgfbsde/error.hpp"
#include "sgfbsde/problem.hpp"

namespace sgfbsde {

namespace detail {

inline void diagonal(MutVec out, std::size_t q, auto&& entry) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < q; ++i) out[i * q + i] = entry(i);
}

inline std::size_t next(std::size_t i, std::size_t q) { return (i + 1) % q; }
inline std::size_t prev(std::size_t i, std::size_t q) { return (i + q - 1) % q; }

}  // namespace detail

/// Two-dimensional coupled problem with Y = sin(4(x1+t)) sin(4(x2+t)).
/// The solution has period pi/2 in each coordinate; the fixed box is
/// [-w, w]^2 with w = periods * pi/4, so the default is one period cell and
/// periods = 4 gives [-pi, pi]^2.
inline FbsdeProblem example1(double T = 1.0, int periods = 1) {
  require(periods >= 1, "example1 needs at least one period per side");
  FbsdeProblem p;
  p.name = "example1";
  p.q = p.d = 2;
  p.m = 1;
  p.horizon = T;
  p.coupled = true;
  p.drift = [](double t, ConstVec x, ConstVec, ConstVec, MutVec out) {
    for (std::size_t i = 0; i < 2; ++i) out[i] = std::cos(4.0 * (x[i] + t)) / 4.0 - 1.0;
  };
  p.diffusion = [](double t, ConstVec x, ConstVec, ConstVec, MutVec out) {
    detail::diagonal(out, 2, [&](std::size_t i) {
      const double a = 4.0 * (x[i] + t);
      return std::cos(a) * std::sin(a) / 4.0;
    });
  };
  p.generator = [](double t, ConstVec x, ConstVec y, ConstVec z, MutVec out) {
    const double s1 = std::sin(4.0 * (t + x[0])), s2 = std::sin(4.0 * (t + x[1]));
    const double c1 = std::cos(4.0 * (t + x[0])), c2 = std::cos(4.0 * (t + x[1]));
    out[0] = 0.5 * (z[0] * s1 * s1 + z[1] * s2 * s2) - y[0] * (c1 * c1 + c2 * c2) + s2 * c1 * c1 * (s1 - 1.0) +
             s1 * c2 * c2 * (s2 - 1.0);
  };
  p.terminal = [T](ConstVec x, MutVec out) {
    out[0] = std::sin(4.0 * (x[0] + T)) * std::sin(4.0 * (x[1] + T));
  };
  p.exact_y = [](double t, ConstVec x, MutVec out) {
    out[0] = std::sin(4.0 * (x[0] + t)) * std::sin(4.0 * (x[1] + t));
  };
  p.exact_z = [](double t, ConstVec x, MutVec out) {
    const double prod = std::sin(4.0 * (x[0] + t)) * std::sin(4.0 * (x[1] + t));
    for (std::size_t i = 0; i < 2; ++i) {
      const double c = std::cos(4.0 * (t + x[i]));
      out[i] = prod * c * c;
    }
  };
  p.domain.strategy = DomainStrategy::fixed;
  const double w = periods * std::numbers::pi / 4.0;
  p.domain.initial = DomainBox::cube(2, -w, w);
  p.domain.periodic = true;
  return p;
}

/// Decoupled q-dimensional problem with polynomial solution
/// Y = (1/q) sum_j x_j^2 prod_{k != j} (x_k + t).
inline FbsdeProblem example2(int q, double T = 1.0) {
  require(q >= 2 && q <= 6, "example2 needs 2 <= q <= 6");
  const auto uq = static_cast<std::size_t>(q);
  const double inv_q = 1.0 / q;

  // prod_{k not in {i, j}} (x_k + t); pass i == j to skip a single index.
  auto prod_except = [uq](double t, ConstVec x, std::size_t i, std::size_t j) {
    double r = 1.0;
    for (std::size_t k = 0; k < uq; ++k)
      if (k != i && k != j) r *= x[k] + t;
    return r;
  };

  FbsdeProblem p;
  p.name = "example2:q=" + std::to_string(q);
  p.q = p.d = q;
  p.m = 1;
  p.horizon = T;
  p.coupled = false;
  p.drift = [uq, inv_q](double, ConstVec x, ConstVec, ConstVec, MutVec out) {
    for (std::size_t i = 0; i < uq; ++i) out[i] = inv_q * x[i] * std::exp(-x[i] * x[i]);
  };
  p.diffusion = [uq, inv_q](double, ConstVec x, ConstVec, ConstVec, MutVec out) {
    detail::diagonal(out, uq, [&](std::size_t i) { return inv_q * std::exp(-x[i] * x[i]); });
  };
  p.generator = [uq, inv_q, prod_except](double t, ConstVec x, ConstVec y, ConstVec z, MutVec out) {
    double f = inv_q * inv_q * y[0];
    for (std::size_t i = 0; i < uq; ++i) {
      f -= x[i] * z[i];
      f -= inv_q * inv_q * inv_q * (x[i] * x[i] + std::exp(-2.0 * x[i] * x[i])) * prod_except(t, x, i, i);
      double inner = 0.0;
      for (std::size_t j = 0; j < uq; ++j)
        if (j != i) inner += prod_except(t, x, i, j);
      f -= inv_q * x[i] * x[i] * inner;
    }
    out[0] = f;
  };
  auto y_exact = [uq, inv_q, prod_except](double t, ConstVec x) {
    double s = 0.0;
    for (std::size_t j = 0; j < uq; ++j) s += x[j] * x[j] * prod_except(t, x, j, j);
    return inv_q * s;
  };
  p.terminal = [y_exact, T](ConstVec x, MutVec out) { out[0] = y_exact(T, x); };
  p.exact_y = [y_exact](double t, ConstVec x, MutVec out) { out[0] = y_exact(t, x); };
  p.exact_z = [uq, inv_q, prod_except](double t, ConstVec x, MutVec out) {
    for (std::size_t i = 0; i < uq; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < uq; ++j)
        if (j != i) s += x[j] * x[j] * prod_except(t, x, i, j);
      const double e = std::exp(-x[i] * x[i]);
      out[i] = inv_q * inv_q * e * (s + 2.0 * x[i] * prod_except(t, x, i, i));
    }
  };
  p.domain.strategy = DomainStrategy::propagated;
  p.domain.initial = DomainBox::cube(q, -1.0, 1.0);
  p.domain.drift_bound = std::exp(-0.5) / (q * std::numbers::sqrt2);
  p.domain.diffusion_bound = inv_q;
  return p;
}

/// Coupled q-dimensional problem with cyclic polynomial solution
/// Y = (1/q) sum_j x_j^2 (x_{j+1} + t).
inline FbsdeProblem example3(int q, double T = 1.0) {
  require(q >= 2 && q <= 5, "example3 needs 2 <= q <= 5");
  const auto uq = static_cast<std::size_t>(q);
  const double inv_q = 1.0 / q;
  auto y_exact = [uq, inv_q](double t, ConstVec x) {
    double s = 0.0;
    for (std::size_t j = 0; j < uq; ++j) s += x[j] * x[j] * (x[detail::next(j, uq)] + t);
    return inv_q * s;
  };

  FbsdeProblem p;
  p.name = "example3:q=" + std::to_string(q);
  p.q = p.d = q;
  p.m = 1;
  p.horizon = T;
  p.coupled = true;
  p.drift = [uq](double t, ConstVec x, ConstVec y, ConstVec, MutVec out) {
    for (std::size_t i = 0; i < uq; ++i) {
      const double c = std::cos(y[0] + x[i]);
      out[i] = 0.5 * t * c * c;
    }
  };
  p.diffusion = [uq](double t, ConstVec x, ConstVec y, ConstVec, MutVec out) {
    detail::diagonal(out, uq, [&](std::size_t i) {
      const double s = std::sin(y[0] + x[i]);
      return 0.5 * t * s * s;
    });
  };
  p.generator = [uq, inv_q](double t, ConstVec x, ConstVec y, ConstVec z, MutVec out) {
    double f = 0.0;
    for (std::size_t i = 0; i < uq; ++i) {
      const double succ = x[detail::next(i, uq)] + t;
      const double s = std::sin(y[0] + x[i]);
      f += z[i];
      f -= inv_q * (1.0 + 0.5 * t) * x[i] * x[i];
      f -= t * inv_q * x[i] * succ;
      f -= 0.25 * t * t * inv_q * succ * s * s * s * s;
    }
    out[0] = f;
  };
  p.terminal = [y_exact, T](ConstVec x, MutVec out) { out[0] = y_exact(T, x); };
  p.exact_y = [y_exact](double t, ConstVec x, MutVec out) { out[0] = y_exact(t, x); };
  p.exact_z = [uq, inv_q, y_exact](double t, ConstVec x, MutVec out) {
    const double y = y_exact(t, x);
    for (std::size_t i = 0; i < uq; ++i) {
      const double xp = x[detail::prev(i, uq)];
      const double s = std::sin(y + x[i]);
      out[i] = 0.5 * t * inv_q * (xp * xp + 2.0 * x[i] * (x[detail::next(i, uq)] + t)) * s * s;
    }
  };
  p.domain.strategy = DomainStrategy::propagated;
  p.domain.initial = DomainBox::cube(q, -1.0, 1.0);
  p.domain.drift_bound = 0.5 * T;
  p.domain.diffusion_bound = 0.5 * T;
  return p;
}

/// Looks up "example1", "example2:q=<n>" or "example3:q=<n>".
inline FbsdeProblem problem_by_id(const std::string& id, double T = 1.0) {
  if (id == "example1") return example1(T);
  const auto colon = id.find(':');
  if (colon != std::string::npos && id.compare(colon + 1, 2, "q=") == 0) {
    const std::string family = id.substr(0, colon);
    const std::string digits = id.substr(colon + 3);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
        digits.size() <= 2) {
      const int q = std::stoi(digits);
      if (family == "example2") return example2(q, T);
      if (family == "example3") return example3(q, T);
    }
  }
  throw InvalidParameter("unknown problem id '" + id + "'");
}

// ---------------------------------------------------------------------------
// Validators

namespace detail {

struct Sampler {
  std::mt19937_64 rng;
  std::uniform_real_distribution<double> unit{0.0, 1.0};

  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  double uniform(double a, double b) { return a + (b - a) * unit(rng); }

  std::vector<double> in_box(const DomainBox& box) {
    std::vector<double> x(box.dimension());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = uniform(box.lower[i], box.upper[i]);
    return x;
  }
};

/// u_x (m x q) of exact_y by Richardson-extrapolated central differences.
inline std::vector<double> exact_gradient(const FbsdeProblem& prob, double t, ConstVec x, double h) {
  const auto uq = static_cast<std::size_t>(prob.q);
  const auto um = static_cast<std::size_t>(prob.m);
  std::vector<double> g(um * uq), xp(x.begin(), x.end()), up(um), un(um);
  auto central = [&](std::size_t i, double step, std::size_t c) {
    xp[i] = x[i] + step;
    prob.exact_y(t, xp, up);
    xp[i] = x[i] - step;
    prob.exact_y(t, xp, un);
    xp[i] = x[i];
    return (up[c] - un[c]) / (2.0 * step);
  };
  for (std::size_t c = 0; c < um; ++c)
    for (std::size_t i = 0; i < uq; ++i) {
      const double d1 = central(i, h, c), d2 = central(i, 0.5 * h, c);
      g[c * uq + i] = (4.0 * d2 - d1) / 3.0;
    }
  return g;
}

}  // namespace detail

struct ResidualOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 20240601;
  double h_first = 1e-5;   // first derivatives
  double h_second = 1e-3;  // second and mixed derivatives
  double second_order_factor = 0.5;  // weight of the [sigma sigma^T] u_xx term
};

/// max |u_t + sum b_i u_i + c sum [sigma sigma^T]_ij u_ij + f(t, x, u, u_x sigma)|
/// over random (t, x) in [0, T] x initial box, with u = exact_y and
/// derivatives from extrapolated finite differences.
inline double feynman_kac_residual(const FbsdeProblem& prob, const ResidualOptions& opt = {}) {
  if (!prob.exact_y) throw UnsupportedOperation("Feynman-Kac residual needs the exact solution");
  prob.validate();
  const auto uq = static_cast<std::size_t>(prob.q);
  const auto ud = static_cast<std::size_t>(prob.d);
  const auto um = static_cast<std::size_t>(prob.m);
  detail::Sampler s(opt.seed);
  std::vector<double> u(um), up(um), un(um), zc(um * ud, 0.0), z(um * ud), b(uq), sig(uq * ud), f(um), xs(uq);
  double worst = 0.0;

  auto second = [&](double t, ConstVec x, std::size_t i, std::size_t j, double h, std::size_t c) {
    auto at = [&](double di, double dj) {
      std::copy(x.begin(), x.end(), xs.begin());
      xs[i] += di;
      xs[j] += dj;
      prob.exact_y(t, xs, up);
      return up[c];
    };
    if (i == j) return (at(h, 0.0) - 2.0 * at(0.0, 0.0) + at(-h, 0.0)) / (h * h);
    return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
  };

  for (std::size_t n = 0; n < opt.samples; ++n) {
    const double t = s.uniform(0.0, prob.horizon);
    const auto x = s.in_box(prob.domain.initial);
    prob.exact_y(t, x, u);
    if (prob.exact_z)
      prob.exact_z(t, x, zc);
    const auto g = detail::exact_gradient(prob, t, x, opt.h_first);
    prob.drift(t, x, u, zc, b);
    prob.diffusion(t, x, u, zc, sig);
    for (std::size_t c = 0; c < um; ++c)
      for (std::size_t l = 0; l < ud; ++l) {
        double v = 0.0;
        for (std::size_t i = 0; i < uq; ++i) v += g[c * uq + i] * sig[i * ud + l];
        z[c * ud + l] = v;
      }
    prob.generator(t, x, u, z, f);

    const double ht = opt.h_first;
    auto dt_at = [&](double h, std::size_t c) {
      prob.exact_y(t + h, x, up);
      prob.exact_y(t - h, x, un);
      return (up[c] - un[c]) / (2.0 * h);
    };
    for (std::size_t c = 0; c < um; ++c) {
      double r = (4.0 * dt_at(0.5 * ht, c) - dt_at(ht, c)) / 3.0;
      for (std::size_t i = 0; i < uq; ++i) r += b[i] * g[c * uq + i];
      for (std::size_t i = 0; i < uq; ++i)
        for (std::size_t j = 0; j < uq; ++j) {
          double a = 0.0;
          for (std::size_t l = 0; l < ud; ++l) a += sig[i * ud + l] * sig[j * ud + l];
          if (a == 0.0) continue;
          const double h = opt.h_second;
          const double uij = (4.0 * second(t, x, i, j, 0.5 * h, c) - second(t, x, i, j, h, c)) / 3.0;
          r += opt.second_order_factor * a * uij;
        }
      r += f[c];
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

/// max |phi(x) - exact_y(T, x)| over random x in the initial box.
inline double terminal_consistency_error(const FbsdeProblem& prob, std::size_t samples = 1000,
                                         std::uint64_t seed = 7) {
  if (!prob.exact_y) throw UnsupportedOperation("terminal check needs the exact solution");
  const auto um = static_cast<std::size_t>(prob.m);
  detail::Sampler s(seed);
  std::vector<double> a(um), b(um);
  double worst = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    const auto x = s.in_box(prob.domain.initial);
    prob.terminal(x, a);
    prob.exact_y(prob.horizon, x, b);
    for (std::size_t c = 0; c < um; ++c) worst = std::max(worst, std::abs(a[c] - b[c]));
  }
  return worst;
}

/// max |exact_z - u_x sigma(t, x, exact_y, exact_z)| over random (t, x).
inline double z_identity_error(const FbsdeProblem& prob, std::size_t samples = 1000, std::uint64_t seed = 11,
                               double h = 1e-5) {
  if (!prob.has_exact()) throw UnsupportedOperation("Z identity check needs the exact solution");
  const auto uq = static_cast<std::size_t>(prob.q);
  const auto ud = static_cast<std::size_t>(prob.d);
  const auto um = static_cast<std::size_t>(prob.m);
  detail::Sampler s(seed);
  std::vector<double> u(um), z(um * ud), sig(uq * ud);
  double worst = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    const double t = s.uniform(0.0, prob.horizon);
    const auto x = s.in_box(prob.domain.initial);
    prob.exact_y(t, x, u);
    prob.exact_z(t, x, z);
    prob.diffusion(t, x, u, z, sig);
    const auto g = detail::exact_gradient(prob, t, x, h);
    for (std::size_t c = 0; c < um; ++c)
      for (std::size_t l = 0; l < ud; ++l) {
        double v = 0.0;
        for (std::size_t i = 0; i < uq; ++i) v += g[c * uq + i] * sig[i * ud + l];
        worst = std::max(worst, std::abs(v - z[c * ud + l]));
      }
  }
  return worst;
}

struct CoefficientBounds {
  double drift = 0.0;      // max_i |b_i|
  double diffusion = 0.0;  // max_i sum_l |sigma_il|
};

/// Sampled suprema of the forward coefficients over t in [0, T], x in the
/// initial box widened by `widen` on every side, and y, z in [-range, range].
inline CoefficientBounds sample_coefficient_bounds(const FbsdeProblem& prob, std::size_t samples = 100000,
                                                   std::uint64_t seed = 13, double widen = 4.0,
                                                   double range = 5.0) {
  const auto uq = static_cast<std::size_t>(prob.q);
  const auto ud = static_cast<std::size_t>(prob.d);
  const auto um = static_cast<std::size_t>(prob.m);
  DomainBox box = prob.domain.initial;
  for (auto& a : box.lower) a -= widen;
  for (auto& b : box.upper) b += widen;
  detail::Sampler s(seed);
  std::vector<double> y(um), z(um * ud), b(uq), sig(uq * ud);
  CoefficientBounds out;
  for (std::size_t n = 0; n < samples; ++n) {
    const double t = s.uniform(0.0, prob.horizon);
    const auto x = s.in_box(box);
    for (auto& v : y) v = s.uniform(-range, range);
    for (auto& v : z) v = s.uniform(-range, range);
    prob.drift(t, x, y, z, b);
    prob.diffusion(t, x, y, z, sig);
    for (std::size_t i = 0; i < uq; ++i) {
      out.drift = std::max(out.drift, std::abs(b[i]));
      double row = 0.0;
      for (std::size_t l = 0; l < ud; ++l) row += std::abs(sig[i * ud + l]);
      out.diffusion = std::max(out.diffusion, row);
    }
  }
  return out;
}

}  // namespace sgfbsde

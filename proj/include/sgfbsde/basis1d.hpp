#pragma once

// One-dimensional building blocks: nested Chebyshev-Gauss-Lobatto levels,
// Gauss-Hermite rules, and the hierarchical ("transformed") Chebyshev basis.

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sgfbsde/error.hpp"
#include "sgfbsde/index_set.hpp"

namespace sgfbsde {

struct DomainInterval {
  double a = -1.0;
  double b = 1.0;

  void validate() const {
    require(std::isfinite(a) && std::isfinite(b) && a < b, "domain interval needs a < b");
  }

  /// Affine map of [a, b] onto the reference interval [-1, 1].
  double to_reference(double x) const { return (2.0 * x - a - b) / (b - a); }
  double from_reference(double t) const { return 0.5 * (a + b) + 0.5 * (b - a) * t; }
};

// ---------------------------------------------------------------------------
// Chebyshev-Gauss-Lobatto levels

/// cos(j*pi/2^level), computed from the reduced fraction so that a node has
/// the same bit pattern on every level it belongs to.
inline double cgl_node(int level, int j) {
  require(level >= 1 && level <= 30, "CGL level out of range");
  int n = 1 << level;
  require(j >= 0 && j <= n, "CGL node index out of range");
  if (j == 0) return 1.0;
  if (j == n) return -1.0;
  while (j % 2 == 0) {
    j /= 2;
    n /= 2;
  }
  if (2 * j == n) return 0.0;
  if (2 * j > n) return -std::cos(std::numbers::pi * (n - j) / n);
  return std::cos(std::numbers::pi * j / n);
}

/// Reference-interval node carried by one-dimensional hierarchical index k.
/// Level-1 indices {0, 1, 2} sit at {1, 0, -1}; the new points of level
/// j >= 2 follow in order of increasing angle.
inline double hier_node(int k) {
  require(k >= 0, "hierarchical index must be >= 0");
  if (k <= 2) return 1.0 - static_cast<double>(k);
  const int j = hier::owning_level(k);
  const int r = k - hier::first_index(j);
  return cgl_node(j, 2 * r + 1);
}

struct CglLevel {
  int level = 0;
  /// nodes[j] = cos(j*pi/2^level), j = 0..2^level (strictly decreasing).
  std::vector<double> nodes;
  /// hierarchical index carried by nodes[j].
  std::vector<int> hier_index;
  /// positions j whose node is absent from the previous level.
  std::vector<int> new_nodes;
};

inline CglLevel cgl_nodes(int level) {
  require(level >= 1, "CGL level must be >= 1");
  CglLevel out;
  out.level = level;
  const int n = 1 << level;
  out.nodes.resize(static_cast<std::size_t>(n) + 1);
  out.hier_index.resize(out.nodes.size());
  for (int j = 0; j <= n; ++j) {
    out.nodes[static_cast<std::size_t>(j)] = cgl_node(level, j);
    int jj = j, nn = n;
    if (j == 0) {
      out.hier_index[0] = 0;
    } else if (j == n) {
      out.hier_index[static_cast<std::size_t>(j)] = 2;
    } else {
      while (jj % 2 == 0) {
        jj /= 2;
        nn /= 2;
      }
      int lv = 0;
      while ((1 << lv) < nn) ++lv;
      out.hier_index[static_cast<std::size_t>(j)] =
          lv == 1 ? 1 : hier::first_index(lv) + (jj - 1) / 2;
    }
    if (level == 1 || j % 2 == 1) out.new_nodes.push_back(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gauss-Hermite rules for the weight exp(-x^2)

struct GhLevel {
  int level = 0;
  std::vector<double> nodes;    // ascending, symmetric about 0
  std::vector<double> weights;  // positive, sum sqrt(pi)
};

/// n-point Gauss-Hermite rule. Newton iteration on the orthonormal Hermite
/// recurrence from asymptotic starting guesses; weights from the derivative.
inline GhLevel gauss_hermite(int n) {
  require(n >= 1, "Gauss-Hermite rule needs n >= 1");
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  double z = 0.0;

  // Evaluates the orthonormal polynomial of degree n and its derivative.
  auto eval = [&](double zz, double& pn, double& dpn) {
    double p1 = pim4, p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = zz * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
    }
    pn = p1;
    dpn = std::sqrt(2.0 * n) * p2;
  };

  for (int i = 0; i < half; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[ui - 2];
    }
    if (n % 2 == 1 && i == half - 1) z = 0.0;

    double pn = 0.0, dpn = 1.0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      eval(z, pn, dpn);
      const double dz = pn / dpn;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged || !std::isfinite(z)) throw NumericError("Gauss-Hermite Newton iteration did not converge");
    if (n % 2 == 1 && i == half - 1) z = 0.0;  // exact centre for odd n
    eval(z, pn, dpn);
    x[ui] = z;
    w[ui] = 2.0 / (dpn * dpn);
    x[static_cast<std::size_t>(n - 1 - i)] = -z;
    w[static_cast<std::size_t>(n - 1 - i)] = w[ui];
  }

  GhLevel out;
  out.nodes.assign(x.rbegin(), x.rend());
  out.weights.assign(w.rbegin(), w.rend());
  return out;
}

/// Level-i Gauss-Hermite rule: the 2^i - 1 roots of the Hermite polynomial.
inline GhLevel gh_rule(int level) {
  require(level >= 1 && level <= 10, "Gauss-Hermite level must be in 1..10");
  auto r = gauss_hermite((1 << level) - 1);
  r.level = level;
  return r;
}

// ---------------------------------------------------------------------------
// Hierarchical Chebyshev basis

/// T_0(t) .. T_kmax(t) by the three-term recurrence; valid for any real t.
inline void chebyshev_values(double t, int kmax, std::span<double> out) {
  out[0] = 1.0;
  if (kmax >= 1) out[1] = t;
  const double two_t = 2.0 * t;
  for (int k = 2; k <= kmax; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    out[uk] = two_t * out[uk - 1] - out[uk - 2];
  }
}

/// Hierarchical basis values T~_0(t) .. T~_kmax(t) in the reference
/// coordinate: T~_k = T_k on level 1 and T_k - T_{2^j - k} on level j >= 2.
inline void hierarchical_values(double t, int kmax, std::span<double> out) {
  chebyshev_values(t, kmax, out);
  // Descending order keeps every T_{2^j-k} (< k) untouched when it is read.
  for (int k = kmax; k >= 3; --k) {
    const int j = hier::owning_level(k);
    out[static_cast<std::size_t>(k)] -= out[static_cast<std::size_t>((1 << j) - k)];
  }
}

/// T~_k evaluated at x after mapping dom onto [-1, 1]. k must belong to level j.
inline double hier_cheb_eval(int k, int j, double x, const DomainInterval& dom) {
  dom.validate();
  require(j >= 1 && k >= 0 && hier::owning_level(k) == j,
          "basis index does not belong to the stated level");
  std::vector<double> v(static_cast<std::size_t>(k) + 1);
  hierarchical_values(dom.to_reference(x), k, v);
  return v.back();
}

/// Collocation matrix A(j, k) = T~_k(x_j) over the full index set I^level,
/// rows are points and columns basis functions, both in hierarchical order.
inline Eigen::MatrixXd collocation_matrix(int level) {
  const int n = hier::level_size(level);
  Eigen::MatrixXd a(n, n);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    hierarchical_values(hier_node(j), n - 1, v);
    for (int k = 0; k < n; ++k) a(j, k) = v[static_cast<std::size_t>(k)];
  }
  return a;
}

/// Cached inverse of the level collocation matrix, so that coefficients on
/// a one-dimensional pencil are transform_matrix(level) * values.
inline const Eigen::MatrixXd& transform_matrix(int level) {
  require(level >= 1 && level <= 12, "transform level out of range");
  static std::mutex mutex;
  static std::vector<std::unique_ptr<const Eigen::MatrixXd>> cache(13);
  std::lock_guard lock(mutex);
  auto& slot = cache[static_cast<std::size_t>(level)];
  if (!slot) {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(collocation_matrix(level));
    if (!lu.isInvertible()) throw NumericError("singular hierarchical collocation matrix");
    slot = std::make_unique<const Eigen::MatrixXd>(lu.inverse());
  }
  return *slot;
}

}  // namespace sgfbsde

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgfbsde/sparse_grid.hpp"

namespace sgfbsde {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

enum class DomainStrategy { fixed, propagated };

/// How the per-time-level computational boxes are chosen.
struct DomainSpec {
  DomainStrategy strategy = DomainStrategy::fixed;
  DomainBox initial;            // box at t = 0
  double drift_bound = 0.0;     // C_b >= sup |b_i|
  double diffusion_bound = 0.0; // C_sigma >= sup_i sum_l |sigma_il|
  /// The solution is periodic with the box as period cell; evaluation
  /// points leaving a fixed box are wrapped back into it.
  bool periodic = false;
};

/// Coupled FBSDE
///   dX = b(t,X,Y,Z) dt + sigma(t,X,Y,Z) dW,   X in R^q, W in R^d
///   -dY = f(t,X,Y,Z) dt - Z dW,                Y in R^m, Z in R^{m x d}
///   Y_T = phi(X_T).
/// z arguments and Z values are m x d row-major.
struct FbsdeProblem {
  using Coefficient = std::function<void(double t, ConstVec x, ConstVec y, ConstVec z, MutVec out)>;
  using Field = std::function<void(double t, ConstVec x, MutVec out)>;

  std::string name;
  int q = 1;
  int d = 1;
  int m = 1;
  double horizon = 1.0;
  /// false when b and sigma ignore y and z.
  bool coupled = true;

  Coefficient drift;      // -> q
  Coefficient diffusion;  // -> q x d row-major
  Coefficient generator;  // -> m
  std::function<void(ConstVec x, MutVec out)> terminal;  // -> m
  Field exact_y;  // optional, -> m
  Field exact_z;  // optional, -> m x d

  DomainSpec domain;

  bool has_exact() const { return static_cast<bool>(exact_y) && static_cast<bool>(exact_z); }

  void validate() const {
    require(q >= 1 && d >= 1 && m >= 1, "problem dimensions must be positive");
    require(horizon > 0.0, "problem horizon must be positive");
    require(drift && diffusion && generator && terminal, "problem is missing a coefficient function");
    domain.initial.validate();
    require(static_cast<int>(domain.initial.dimension()) == q, "problem domain has wrong dimension");
    require(domain.drift_bound >= 0.0 && domain.diffusion_bound >= 0.0, "coefficient bounds must be >= 0");
  }
};

}  // namespace sgfbsde

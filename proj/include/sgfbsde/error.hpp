#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgfbsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller supplied an argument outside the documented domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// A floating-point computation produced a non-finite or singular result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The operation needs data the object does not carry (e.g. no exact solution).
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Picard iteration at one grid point failed to reach the tolerance.
class SolverDivergence : public Error {
 public:
  SolverDivergence(int time_index, std::vector<double> point, double residual)
      : Error(describe(time_index, point, residual)),
        time_index_(time_index),
        point_(std::move(point)),
        residual_(residual) {}

  int time_index() const noexcept { return time_index_; }
  const std::vector<double>& point() const noexcept { return point_; }
  double residual() const noexcept { return residual_; }

 private:
  static std::string describe(int n, const std::vector<double>& x, double r) {
    std::string s = "Picard iteration did not converge at time level " +
                    std::to_string(n) + ", x = (";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(x[i]);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", r);
    s += "), last residual ";
    s += buf;
    return s;
  }

  int time_index_;
  std::vector<double> point_;
  double residual_;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw InvalidParameter(message);
}

}  // namespace sgfbsde

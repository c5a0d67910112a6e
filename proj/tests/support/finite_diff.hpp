#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace cadex::testing {

struct FdResult {
  double numeric = 0.0;
  /// False when the one-sided differences disagree, i.e. a kink lies within
  /// the step and the central difference is not a derivative estimate.
  bool smooth = true;
};

/// Central difference of f around the current value of `x`, which is
/// restored afterwards.
inline FdResult central_difference(double& x, const std::function<double()>& f, double h = 1e-4) {
  const double x0 = x;
  const double f0 = f();
  x = x0 + h;
  const double fp = f();
  x = x0 - h;
  const double fm = f();
  x = x0;
  FdResult r;
  r.numeric = (fp - fm) / (2.0 * h);
  const double fwd = (fp - f0) / h;
  const double bwd = (f0 - fm) / h;
  r.smooth = std::abs(fwd - bwd) <= 1e-3 * std::max({std::abs(fwd), std::abs(bwd), 1e-3});
  return r;
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace cadex::testing

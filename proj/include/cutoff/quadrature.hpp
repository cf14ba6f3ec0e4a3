#pragma once

#include <functional>

namespace cutoff {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Adaptive Gauss-Kronrod (7/15) integral of f over [a, b] with relative
/// tolerance `tol`. Orientation is respected (a > b gives the negated value).
/// Throws EngineError when the error estimate misses the tolerance.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-12);

}  // namespace cutoff

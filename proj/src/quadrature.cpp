#include "cutoff/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "cutoff/error.hpp"

namespace cutoff {

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double tol) {
  if (a == b) return {};
  double err = 0.0;
  double l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 15, tol, &err, &l1);
  if (!std::isfinite(value)) throw NonFiniteError("quadrature produced a non-finite value");
  // boost sums leaf errors measured on [-1, 1]; rescaling by the half-width of
  // the whole interval gives an upper bound on the absolute error.
  const double abs_err = err * std::abs(b - a) / 2.0;
  const double scale = std::max(std::abs(value), l1);
  // The floor covers integrands that vanish up to rounding noise.
  if (abs_err > 1e3 * tol * scale && abs_err > 1e-11 * std::abs(b - a)) {
    throw EngineError("quadrature did not converge on [" + std::to_string(a) + ", " +
                      std::to_string(b) + "]: error bound " + std::to_string(abs_err));
  }
  return {value, abs_err};
}

}  // namespace cutoff

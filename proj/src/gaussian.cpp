#include "cutoff/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cutoff/error.hpp"

namespace cutoff {

double GaussianLaw::stddev() const { return std::sqrt(variance); }

double GaussianLaw::pdf(double x) const {
  const double z = (x - mean) / stddev();
  return std::exp(-0.5 * z * z) / (stddev() * std::sqrt(2.0 * std::numbers::pi));
}

double GaussianLaw::cdf(double x) const { return normal_cdf((x - mean) / stddev()); }

GaussianLaw make_gaussian(double mean, double variance) {
  if (!std::isfinite(mean)) throw ValidationError("gaussian mean must be finite");
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ValidationError("gaussian variance must be finite and > 0, got " +
                          std::to_string(variance));
  }
  return {mean, variance};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double tv_unit(double mu) {
  if (!std::isfinite(mu)) throw ValidationError("tv_unit: mean shift must be finite");
  return std::erf(std::abs(mu) / (2.0 * std::numbers::sqrt2));
}

namespace {

void check_law(const GaussianLaw& g) { make_gaussian(g.mean, g.variance); }

// P(r1 < X < r2) for X ~ N(m, s^2), using the tail that keeps precision.
double mass_between(double r1, double r2, double m, double s) {
  const double z1 = (r1 - m) / s;
  const double z2 = (r2 - m) / s;
  if (z1 > 0.0) return normal_cdf(-z1) - normal_cdf(-z2);
  return normal_cdf(z2) - normal_cdf(z1);
}

}  // namespace

double tv_normal(const GaussianLaw& a, const GaussianLaw& b) {
  check_law(a);
  check_law(b);
  // Affine map taking a to N(0,1): b becomes N(d, s^2).
  const double sa = a.stddev();
  const double d = (b.mean - a.mean) / sa;
  const double s2 = b.variance / a.variance;
  if (s2 == 1.0) return tv_unit(d);

  // ln g - ln f = 0  <=>  A x^2 + B x + C = 0, with f > g where A x^2 + B x + C < 0.
  const double A = 1.0 - 1.0 / s2;
  const double B = 2.0 * d / s2;
  const double C = -d * d / s2 - std::log(s2);
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 1e-14) return tv_unit(d);

  const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
  double r1 = q / A;
  double r2 = C / q;
  if (r1 > r2) std::swap(r1, r2);
  const double s = std::sqrt(s2);
  const double tv = mass_between(r1, r2, 0.0, 1.0) - mass_between(r1, r2, d, s);
  return std::min(1.0, std::abs(tv));
}

double kl_normal(const GaussianLaw& a, const GaussianLaw& b) {
  check_law(a);
  check_law(b);
  const double dm = a.mean - b.mean;
  const double r = a.variance / b.variance;
  return 0.5 * (r - 1.0 - std::log(r) + dm * dm / b.variance);
}

double profile(double b, double constant) {
  if (constant == 0.0 || !std::isfinite(constant)) {
    throw ValidationError("profile constant must be finite and nonzero (x0 = 0 is degenerate)");
  }
  if (std::isnan(b)) throw ValidationError("profile: b is NaN");
  const double mu = std::exp(std::log(std::abs(constant)) - b);
  if (std::isinf(mu)) return 1.0;
  return tv_unit(mu);
}

ProfileCurve profile_curve(double constant, const Eigen::ArrayXd& b) {
  ProfileCurve c{constant, b, Eigen::ArrayXd(b.size())};
  for (Eigen::Index i = 0; i < b.size(); ++i) c.g[i] = profile(b[i], constant);
  return c;
}

CutoffSchedule schedule(double curvature, double epsilon, double gamma, ScheduleMode mode,
                        double y0) {
  if (!(curvature > 0.0) || !std::isfinite(curvature)) {
    throw ValidationError("schedule: V'' at the minimum must be > 0");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("schedule: epsilon must be > 0");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("schedule: gamma must lie in (0,1), got " + std::to_string(gamma));
  }
  if (mode == ScheduleMode::linearized && (y0 == 0.0 || !std::isfinite(y0))) {
    throw ValidationError("schedule: the linearized schedule needs y0 != 0");
  }

  CutoffSchedule s;
  s.mode = mode;
  s.curvature = curvature;
  s.epsilon = epsilon;
  s.gamma = gamma;
  s.y0 = y0;
  s.delta = std::pow(epsilon, gamma);
  const double a = curvature;
  switch (mode) {
    case ScheduleMode::linearized:
      s.t_eps = (std::log(1.0 / epsilon) + std::log(2.0 * a * y0 * y0)) / (2.0 * a);
      s.window = 1.0 / a;
      break;
    case ScheduleMode::general:
      s.t_eps = (std::log(1.0 / epsilon) + std::log(2.0 * a)) / (2.0 * a);
      s.window = 1.0 / a + s.delta;
      break;
    case ScheduleMode::local:
      s.t_eps = std::log(1.0 / epsilon) / (2.0 * a);
      s.window = 1.0 / a + s.delta;
      break;
  }
  return s;
}

void require_positive_times(const CutoffSchedule& s, const Eigen::ArrayXd& b, bool shifted) {
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double t = shifted ? s.shifted_time(b[i]) : s.time(b[i]);
    if (!(t > 0.0)) {
      throw ValidationError("epsilon = " + std::to_string(s.epsilon) +
                            " is too large: the scheduled time at b = " + std::to_string(b[i]) +
                            " is not positive");
    }
  }
}

}  // namespace cutoff

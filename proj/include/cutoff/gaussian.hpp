#pragma once

#include <Eigen/Dense>

namespace cutoff {

/// N(mean, variance), variance > 0.
struct GaussianLaw {
  double mean = 0.0;
  double variance = 1.0;

  double stddev() const;
  double pdf(double x) const;
  double cdf(double x) const;
};

/// Throws ValidationError unless variance is finite and > 0.
GaussianLaw make_gaussian(double mean, double variance);

double normal_cdf(double x);

/// ||N(mu, 1) - N(0, 1)||_TV = 2 Phi(|mu|/2) - 1.
double tv_unit(double mu);

/// Exact TV between two Gaussians. Equal variances reduce to tv_unit; otherwise
/// the two density crossings are found in closed form.
double tv_normal(const GaussianLaw& a, const GaussianLaw& b);

/// KL(a | b).
double kl_normal(const GaussianLaw& a, const GaussianLaw& b);

/// G(b) = tv_unit(|constant| e^{-b}).
double profile(double b, double constant);

struct ProfileCurve {
  double constant = 1.0;
  Eigen::ArrayXd b;
  Eigen::ArrayXd g;
};

ProfileCurve profile_curve(double constant, const Eigen::ArrayXd& b);

enum class ScheduleMode {
  linearized,  // t = [ln(1/eps) + ln(2 a y0^2)]/(2a), w = 1/a
  general,     // t = [ln(1/eps) + ln(2 a)]/(2a),      w = 1/a + eps^gamma
  local,       // t = ln(1/eps)/(2a),                  w = 1/a + eps^gamma
};

/// Cut-off time and window around a minimum with curvature a = V''(min).
struct CutoffSchedule {
  ScheduleMode mode = ScheduleMode::general;
  double curvature = 1.0;
  double epsilon = 0.0;
  double gamma = 0.5;
  double y0 = 1.0;
  double delta = 0.0;   // eps^gamma
  double t_eps = 0.0;
  double window = 0.0;

  /// t_eps + b * window
  double time(double b) const { return t_eps + b * window; }
  /// t_eps + b * (1/a + delta). Equals time(b) for the general and local modes.
  double shifted_time(double b) const { return t_eps + b * (1.0 / curvature + delta); }
};

CutoffSchedule schedule(double curvature, double epsilon, double gamma,
                        ScheduleMode mode = ScheduleMode::general, double y0 = 1.0);

/// Throws ValidationError naming the first b with time(b) <= 0 (or shifted_time
/// when `shifted`): epsilon is too large for that point of the window.
void require_positive_times(const CutoffSchedule& s, const Eigen::ArrayXd& b, bool shifted);

}  // namespace cutoff

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/potential.hpp"

namespace cutoff {

/// Samples of the noiseless flow d(psi) = -V'(psi) dt started at x0, the
/// fundamental solution Phi_t = V'(psi_t)/V'(x0) and I_t = int_0^t Phi_s^{-2} ds.
///
/// Logs are kept next to the values so that interpolation and long horizons
/// stay accurate while psi and Phi decay exponentially.
struct SemiflowTrajectory {
  double x0 = 0.0;
  double curvature = 0.0;  // V''(0)
  Eigen::VectorXd t;
  Eigen::VectorXd psi;
  Eigen::VectorXd phi;
  Eigen::VectorXd integral;
  Eigen::VectorXd log_abs_psi;
  Eigen::VectorXd log_phi;
  // time derivatives of log|psi|, log Phi and I at the samples
  Eigen::VectorXd dlog_abs_psi;
  Eigen::VectorXd dlog_phi;
  Eigen::VectorXd dintegral;
  std::size_t rejected_steps = 0;

  double t_end() const { return t.size() ? t[t.size() - 1] : 0.0; }
};

struct SemiflowPoint {
  double t = 0.0;
  double psi = 0.0;
  double phi = 1.0;
  double integral = 0.0;
};

/// Dormand-Prince 5(4) in the variable log|psi| with I co-integrated.
/// Every entry of output_times inside [0, t_end] is hit exactly.
/// Throws ValidationError for x0 = 0 or bad tol, EngineError on step-size
/// underflow or when the flow leaves [-|x0|, |x0|].
SemiflowTrajectory integrate_semiflow(const Potential& p, double x0, double t_end, double tol,
                                      const std::vector<double>& output_times = {});

/// Cubic Hermite interpolation (exact slopes) in log|psi|, log Phi and log I.
/// Throws ValidationError for t outside the trajectory.
SemiflowPoint sample(const SemiflowTrajectory& traj, double t);

/// H(z) = V''(0)/V'(z) - 1/z. For |z| < 0.1 the numerator a z - V'(z) comes
/// from a Gauss-Legendre integral of V''' instead of a cancelling difference.
double limit_integrand(const Potential& p, double z);

struct ConstantsReport {
  double curvature = 0.0;   // V''(0)
  double c_tilde = 0.0;     // lim e^{V''(0) t} psi_t, by quadrature of H
  double c = 0.0;           // lim e^{V''(0) t} Phi_t, by quadrature of H
  double c_tilde_extrapolated = 0.0;
  double c_extrapolated = 0.0;
  double disagreement = 0.0;  // max relative gap between the two methods
  double variance_limit = 0.0;
  std::string method = "quadrature";
  std::string cross_check = "richardson-extrapolation";
};

/// c~ = h(x0) = x0 exp(int_0^x0 H) and c = V''(0) h(x0)/V'(x0), cross-checked
/// against extrapolated semiflow tails. Disagreement above 100 tol throws EngineError.
ConstantsReport limit_constants(const Potential& p, double x0, double tol = 1e-8);

struct VarianceLimit {
  double at_end = 0.0;       // Phi_T^2 I_T
  double extrapolated = 0.0;
};

/// Phi_t^2 I_t at the end of the trajectory and its extrapolated limit.
/// Needs |psi_end| < 1e-4 |x0|.
VarianceLimit variance_limit(const SemiflowTrajectory& traj, double curvature);

/// sup over [t1, t2] of |psi_t| / sqrt(eps), maximized over the samples plus
/// both endpoints.
double psi_sup_ratio(const SemiflowTrajectory& traj, double epsilon, double t1, double t2);

/// Solves L + A e^{-a t} + B e^{-2 a t} through three samples; returns L.
double richardson_limit(const Eigen::Vector3d& t, const Eigen::Vector3d& f, double rate);

}  // namespace cutoff

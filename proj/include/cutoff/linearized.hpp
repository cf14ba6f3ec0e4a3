#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cutoff/gaussian.hpp"
#include "cutoff/potential.hpp"
#include "cutoff/semiflow.hpp"

namespace cutoff {

/// Law of y_t = Phi_t y0 + sqrt(eps) Phi_t int_0^t Phi_s^{-1} dW_s:
/// N(Phi_t y0, eps Phi_t^2 I_t). variance is 0 only at t = 0.
struct LinearLaw {
  double t = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double epsilon = 0.0;
  double y0 = 0.0;

  GaussianLaw gaussian() const;
};

LinearLaw law_at(const SemiflowTrajectory& traj, double epsilon, double y0, double t);

/// Law of z_t = psi_t + sqrt(eps) y_t with y0 = 0: N(psi_t, eps Phi_t^2 I_t).
LinearLaw first_order_law(const SemiflowTrajectory& traj, double epsilon, double t);

/// TV from the linearized law at t to N(0, eps/(2 V''(0))).
double linearized_distance(const SemiflowTrajectory& traj, double epsilon, double y0, double t);

/// Same for the first-order law.
double first_order_distance(const SemiflowTrajectory& traj, double epsilon, double t);

enum class DistanceConvention {
  linearized,   // d(t): linearized law vs N(0, eps/2V''(0))
  first_order,  // first-order law vs N(0, eps/2V''(0))
  general,      // D(t): law of x_t vs the Gibbs measure
  local,        // conditioned law near a metastable well
};

struct DistanceSeries {
  DistanceConvention convention = DistanceConvention::linearized;
  Eigen::ArrayXd b;
  Eigen::ArrayXd t;
  Eigen::ArrayXd d;
};

enum class ProfileMode {
  linearized,   // ln(2a y0^2) schedule, window 1/a, constant c
  first_order,  // ln(2a) schedule, window 1/a + eps^gamma, constant c~
};

struct ProfileRow {
  double epsilon = 0.0;
  double b = 0.0;
  double t = 0.0;
  double distance = 0.0;
  double profile = 0.0;
  bool flagged = false;  // scheduled time not positive; distance left NaN
};

struct ProfileTable {
  ProfileMode mode = ProfileMode::linearized;
  double constant = 0.0;
  std::vector<ProfileRow> rows;
  std::vector<double> epsilons;
  std::vector<double> sup_error;  // sup over unflagged b of |d - G|, one per epsilon
};

/// d(t_eps(b)) against G(b) for every (eps, b). Rows for different eps are
/// independent; `workers` > 1 computes them concurrently.
ProfileTable profile_convergence(const Potential& p, double x0, double y0, double gamma,
                                 const std::vector<double>& eps_list, const Eigen::ArrayXd& b_grid,
                                 ProfileMode mode = ProfileMode::linearized, int workers = 1,
                                 double tol = 1e-10);

}  // namespace cutoff

#include "cutoff/linearized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cutoff/error.hpp"
#include "cutoff/parallel.hpp"

namespace cutoff {

GaussianLaw LinearLaw::gaussian() const { return make_gaussian(mean, variance); }

LinearLaw law_at(const SemiflowTrajectory& traj, double epsilon, double y0, double t) {
  if (!(epsilon > 0.0)) throw ValidationError("law_at: epsilon must be > 0");
  if (y0 == 0.0 || !std::isfinite(y0)) {
    throw ValidationError("law_at: y0 must be nonzero; use first_order_law for y0 = 0");
  }
  const auto s = sample(traj, t);
  return {t, s.phi * y0, epsilon * s.phi * s.phi * s.integral, epsilon, y0};
}

LinearLaw first_order_law(const SemiflowTrajectory& traj, double epsilon, double t) {
  if (!(epsilon > 0.0)) throw ValidationError("first_order_law: epsilon must be > 0");
  const auto s = sample(traj, t);
  return {t, s.psi, epsilon * s.phi * s.phi * s.integral, epsilon, 0.0};
}

namespace {

GaussianLaw limit_law(const SemiflowTrajectory& traj, double epsilon) {
  return make_gaussian(0.0, epsilon / (2.0 * traj.curvature));
}

}  // namespace

double linearized_distance(const SemiflowTrajectory& traj, double epsilon, double y0, double t) {
  if (!(t > 0.0)) throw ValidationError("linearized_distance: t must be > 0");
  return tv_normal(law_at(traj, epsilon, y0, t).gaussian(), limit_law(traj, epsilon));
}

double first_order_distance(const SemiflowTrajectory& traj, double epsilon, double t) {
  if (!(t > 0.0)) throw ValidationError("first_order_distance: t must be > 0");
  return tv_normal(first_order_law(traj, epsilon, t).gaussian(), limit_law(traj, epsilon));
}

ProfileTable profile_convergence(const Potential& p, double x0, double y0, double gamma,
                                 const std::vector<double>& eps_list, const Eigen::ArrayXd& b_grid,
                                 ProfileMode mode, int workers, double tol) {
  if (eps_list.empty() || b_grid.size() == 0) {
    throw ValidationError("profile_convergence: empty epsilon list or b grid");
  }
  const auto constants = limit_constants(p, x0, std::max(tol, 1e-9));
  const double a = constants.curvature;

  ProfileTable table;
  table.mode = mode;
  table.constant = mode == ProfileMode::linearized ? constants.c : constants.c_tilde;
  table.epsilons = eps_list;
  table.sup_error.assign(eps_list.size(), 0.0);
  std::vector<std::vector<ProfileRow>> blocks(eps_list.size());

  parallel_for(eps_list.size(), workers, [&](std::size_t e) {
    const double eps = eps_list[e];
    const auto s = mode == ProfileMode::linearized
                       ? schedule(a, eps, gamma, ScheduleMode::linearized, y0)
                       : schedule(a, eps, gamma, ScheduleMode::general);
    std::vector<double> times;
    double t_max = 0.0;
    for (Eigen::Index i = 0; i < b_grid.size(); ++i) {
      const double t = s.time(b_grid[i]);
      if (t > 0.0) times.push_back(t);
      t_max = std::max({t_max, t, s.shifted_time(b_grid[i])});
    }
    const auto traj = integrate_semiflow(p, x0, t_max + s.window, tol, times);
    double sup = 0.0;
    auto& rows = blocks[e];
    for (Eigen::Index i = 0; i < b_grid.size(); ++i) {
      ProfileRow row;
      row.epsilon = eps;
      row.b = b_grid[i];
      row.t = s.time(b_grid[i]);
      row.profile = profile(row.b, table.constant);
      if (row.t > 0.0) {
        row.distance = mode == ProfileMode::linearized ? linearized_distance(traj, eps, y0, row.t)
                                                       : first_order_distance(traj, eps, row.t);
        sup = std::max(sup, std::abs(row.distance - row.profile));
      } else {
        row.flagged = true;
        row.distance = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(row);
    }
    table.sup_error[e] = sup;
  });
  for (auto& rows : blocks) table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  return table;
}

}  // namespace cutoff

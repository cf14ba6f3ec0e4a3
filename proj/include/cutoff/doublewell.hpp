#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/fokker_planck.hpp"
#include "cutoff/gaussian.hpp"
#include "cutoff/monte_carlo.hpp"
#include "cutoff/potential.hpp"
#include "cutoff/well.hpp"

namespace cutoff {

/// All strict local minima of V on [lo, hi], by sign changes of V' on a
/// uniform scan and bisection to `tol`. Barriers come from the interleaved
/// maxima; with two or more wells the lowest is `deep` and the others
/// `shallow` (all `equal` when the depths agree to 1e-12).
///
/// Throws ValidationError when no minimum is found and EngineError for a
/// degenerate critical point (|V''| <= 1e-8 at a root of V').
std::vector<WellDescriptor> find_wells(const Potential& p, double lo, double hi,
                                       double tol = 1e-12, int scan_points = 4001);

enum class CenterMode { at_xstar, at_zero };

std::string to_string(CenterMode m);

struct LocalCutoffOptions {
  CenterMode center = CenterMode::at_xstar;
  FpControls fp;                 // lo/hi are ignored: the basin fixes the domain
  std::size_t escape_paths = 2000;
  double escape_dt = 1e-3;
  std::uint64_t seed = 1;
  double escape_radius_fraction = 0.9;  // of the distance to the saddle
  double escape_limit = 0.01;
  int workers = 1;
};

struct LocalCutoffRow {
  double epsilon = 0.0;
  double b = 0.0;
  double t = 0.0;          // general schedule, with the ln(2 V''(x*)) term
  double distance = 0.0;
  double t_local = 0.0;    // literal local schedule, without it
  double distance_local = 0.0;
  double profile = 0.0;    // G(b; c(x*))
  double escape_fraction = 0.0;
  bool valid = true;
};

struct LocalCutoffTable {
  WellDescriptor well;
  double x0 = 0.0;
  double gamma = 0.5;
  double constant = 0.0;   // c(x*): c~ of the shifted potential at u0 = x0 - x*
  CenterMode center = CenterMode::at_xstar;
  Grid grid;               // basin grid in the shifted coordinate, last epsilon
  std::vector<LocalCutoffRow> rows;
};

/// Local cut-off near a strict minimum. The density is evolved on the well's
/// basin [saddle, outer] with zero-flux ends (the conditioning surrogate) in
/// the shifted coordinate u = x - x*, and compared to N(center, eps/(2V''(x*))).
/// The escape fraction over the largest scheduled time comes from
/// exit_time_stats; rows of an epsilon whose fraction is >= escape_limit are
/// kept but marked invalid.
LocalCutoffTable local_cutoff_experiment(const Potential& p, const WellDescriptor& well,
                                         double x0, double gamma,
                                         const std::vector<double>& eps_list,
                                         const Eigen::ArrayXd& b_grid,
                                         const LocalCutoffOptions& options = {});

/// Escape statistics for the two-regime check: exit over horizon
/// factor * t*(b) from x0, with the exit radius used by the experiment.
ExitStats regime_separation(const Potential& p, const WellDescriptor& well, double x0,
                            double epsilon, double gamma, double b, double factor,
                            std::size_t n_paths, std::uint64_t seed,
                            const LocalCutoffOptions& options = {});

}  // namespace cutoff

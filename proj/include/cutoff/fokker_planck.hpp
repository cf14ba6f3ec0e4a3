#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/gaussian.hpp"
#include "cutoff/linearized.hpp"
#include "cutoff/potential.hpp"

namespace cutoff {

/// Uniform grid on [lo, hi] with n nodes.
struct Grid {
  double lo = -1.0;
  double hi = 1.0;
  Eigen::Index n = 0;

  double h() const { return (hi - lo) / static_cast<double>(n - 1); }
  Eigen::ArrayXd nodes() const { return Eigen::ArrayXd::LinSpaced(n, lo, hi); }
  /// Trapezoid weights (h/2 at both ends).
  Eigen::ArrayXd weights() const;
  bool operator==(const Grid& o) const { return lo == o.lo && hi == o.hi && n == o.n; }
};

Grid make_grid(double lo, double hi, Eigen::Index n);

/// Nodal density values; mass is the trapezoid integral.
struct DensityGrid {
  Grid grid;
  Eigen::ArrayXd p;
  double t = 0.0;

  double mass() const;
  double mean() const;
};

/// Gibbs density e^{-2V/eps}/M on a grid; M is reported through its log
/// because e^{-2V/eps} under- or overflows for small eps.
struct StationaryDensity {
  DensityGrid density;
  double log_normalizer = 0.0;  // log M
  double normalizer() const;    // may be 0 or inf in double precision
};

StationaryDensity stationary_density(const Potential& p, double epsilon, const Grid& grid);
/// Symmetric domain [-L, L]. Throws ValidationError when the tail mass bound
/// outside the domain exceeds 1e-12.
StationaryDensity stationary_density(const Potential& p, double epsilon, double L, Eigen::Index n);

struct FpControls {
  // Domain: explicit [lo, hi] wins, then [-L, L]; otherwise chosen from V.
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  double L = 0.0;
  Eigen::Index n = 0;   // 0 picks h = sigma_eq / resolution
  double dt = 0.0;      // 0 picks 0.5 min(h / max|V'|, h^2 / eps)
  double resolution = 24.0;
  Eigen::Index max_nodes = 400001;
  double curvature = std::numeric_limits<double>::quiet_NaN();  // V'' at the target minimum; NaN uses V''(0)
  bool check_boundary = true;
  // Richardson extrapolation over (h, dt) and (h/2, dt/2); removes the O(h^2)
  // artificial diffusion of the exponentially fitted flux.
  bool extrapolate = true;
};

struct FpDiagnostics {
  Grid grid;
  double dt = 0.0;
  double t_start = 0.0;        // start of the time stepping (after the Dirac surrogate)
  std::size_t steps = 0;
  double max_mass_drift = 0.0; // |mass - 1| at the snapshots
  double min_density = 0.0;    // min over snapshots of p_i h
  double max_boundary = 0.0;   // max density at the two end nodes
  bool extrapolated = false;
};

struct FpRun {
  std::vector<DensityGrid> snapshots;
  FpDiagnostics diagnostics;
};

/// Grid, time step and surrogate start the engine will use for this problem.
Grid default_grid(const Potential& p, double epsilon, double x0, const FpControls& c);
double default_dt(const Potential& p, double epsilon, const Grid& g);

/// Law of dx = -V'(x) dt + sqrt(eps) dW, x_0 = x0, at each of `times`
/// (sorted, any order accepted). Chang-Cooper fluxes, Crank-Nicolson with two
/// backward-Euler start-up steps, zero-flux ends.
///
/// The Dirac start is replaced by the linearized Gaussian at t0 = 4 h^2/eps
/// (standard deviation close to 2h); a snapshot at t = 0 returns the width-2h
/// Gaussian at x0. Times in (0, t0) are rejected.
FpRun evolve(const Potential& p, double epsilon, double x0, const std::vector<double>& times,
             const FpControls& controls = {});

/// Same scheme from an arbitrary initial density; times are relative to `initial.t`.
FpRun evolve_from(const Potential& p, double epsilon, const DensityGrid& initial,
                  const std::vector<double>& times, double dt = 0.0, bool check_boundary = true);

/// 1/2 of the trapezoid L1 distance. Throws ValidationError on a grid mismatch.
double tv_grid(const DensityGrid& a, const DensityGrid& b);
/// Against a Gaussian: includes the Gaussian mass outside the grid exactly.
double tv_grid(const DensityGrid& a, const GaussianLaw& g);

/// TV(mu^eps, N(0, eps/(2V''(0)))), refining the grid until two successive
/// values agree to 1e-5.
double invariantes_gap(const Potential& p, double epsilon);

/// D(t*(b)) for every b: evolve + tv_grid against the stationary density on
/// the same grid. Times come from s.shifted_time.
DistanceSeries general_distance_curve(const Potential& p, double epsilon, double x0,
                                      const CutoffSchedule& s, const Eigen::ArrayXd& b_grid,
                                      const FpControls& controls = {},
                                      FpDiagnostics* diagnostics = nullptr);

/// Largest change of functional(snapshot) over `times` when h and dt are both halved.
double self_convergence(const Potential& p, double epsilon, double x0,
                        const std::vector<double>& times, const FpControls& controls,
                        const std::function<double(const DensityGrid&)>& functional);

}  // namespace cutoff

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/fokker_planck.hpp"
#include "cutoff/gaussian.hpp"
#include "cutoff/potential.hpp"
#include "cutoff/well.hpp"

namespace cutoff {

using PathMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Coupled paths of x (the diffusion), psi (noiseless flow) and y (linearized,
/// y0 = 0), all driven by the same Brownian increments. Rows are paths,
/// columns are record times.
struct PathEnsemble {
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  double x0 = 0.0;
  double dt = 0.0;              // nominal step; actual substeps divide each record gap evenly
  Eigen::ArrayXd times;          // record times, times[0] = 0
  Eigen::ArrayXd psi;            // shared across paths
  PathMatrix x;
  PathMatrix y;
  PathMatrix w;                  // Brownian path W_t
  PathMatrix running_max;        // B_t = max_{s <= t} |W_s| over the simulated steps

  Eigen::Index paths() const { return x.rows(); }
};

struct SimulationOptions {
  double domain = 0.0;  // |x| bound; 0 picks 2 max(|x0|, 1)
  int workers = 1;
};

/// Euler-Maruyama for x and y with shared increments; psi from the semiflow.
/// `record_times` must be increasing and start at or after 0 (0 is added).
/// Throws ValidationError when dt * max|V''| on the domain is >= 0.1, and
/// EngineError when a path leaves the domain.
PathEnsemble simulate_coupled(const Potential& p, double epsilon, double x0, double dt,
                              const std::vector<double>& record_times, std::size_t n_paths,
                              std::uint64_t seed, const SimulationOptions& options = {});

/// Evenly spaced record times 0, t_end/n, ..., t_end.
std::vector<double> record_grid(double t_end, int n_records);

struct BoundReport {
  double kappa2 = 0.0;
  double kappa3 = 0.0;
  std::size_t checks = 0;                 // (path, time) pairs with t > 0
  std::size_t zeroth_violations = 0;      // |x - psi| > sqrt(eps) B (k2 t + 1) + slack
  std::size_t first_violations = 0;       // cubed form: eps B^2 k3 (k2 t + 1)^3 t + slack
  std::size_t first_violations_squared = 0;  // squared form, informational
  double worst_zeroth_margin = std::numeric_limits<double>::infinity();
  double worst_first_margin = std::numeric_limits<double>::infinity();
  double max_slack = 0.0;                 // 5 sqrt(eps dt) (1 + t) at the last record
  bool exponent_discrepancy = true;       // squared vs cubed forms of the first-order bound
};

/// Checks both pathwise estimates at every record with t > 0. Margins are
/// bound + slack - deviation; violations are counted, never thrown.
BoundReport check_order_bounds(const PathEnsemble& e, double kappa2, double kappa3);

struct EmpiricalDensity {
  Eigen::ArrayXd edges;
  Eigen::ArrayXd counts;
  Eigen::ArrayXd heights;  // counts / (N * width)
  std::size_t n = 0;
};

/// Histogram with Freedman-Diaconis bin width over the sample range.
EmpiricalDensity histogram(const Eigen::ArrayXd& samples);

using Reference = std::variant<GaussianLaw, DensityGrid>;

struct TvEstimate {
  double estimate = 0.0;        // 1/2 sum over bins |count/N - reference mass| + outside mass / 2
  double standard_error = 0.0;  // nonparametric bootstrap
  double expected = 0.0;        // mean plug-in value when the samples follow `null_law`
  double debiased = 0.0;        // estimate - expected + binned TV(null_law, reference), clamped to [0, 1]
  std::size_t bins = 0;
  std::size_t n = 0;
};

struct TvOptions {
  int bootstrap = 200;
  std::uint64_t seed = 0x5eed;
  std::optional<Reference> null_law;  // defaults to the reference itself
};

/// Empirical TV between samples and a reference law. Needs N >= 1e4.
TvEstimate empirical_tv(const Eigen::ArrayXd& samples, const Reference& reference,
                        const TvOptions& options = {});

/// Column of an ensemble at record index k.
Eigen::ArrayXd samples_at(const PathEnsemble& e, Eigen::Index k);

struct ExitStats {
  double escape_fraction = 0.0;
  std::size_t escaped = 0;
  std::size_t paths = 0;
  std::vector<double> quantile_levels;
  std::vector<double> quantiles;  // of the first exit time; NaN where fewer paths escaped
};

struct ExitOptions {
  double dt = 1e-3;
  std::optional<double> x0;  // start; defaults to the well
  std::vector<double> quantile_levels{0.1, 0.5, 0.9};
  int workers = 1;
};

/// Fraction of paths with |x - x*| > radius before t_horizon, and exit-time
/// quantiles of the censored exit-time law (NaN when the level is not reached
/// before the horizon). Needs 0 < radius < distance to the saddle.
ExitStats exit_time_stats(const Potential& p, const WellDescriptor& well, double epsilon,
                          double radius,
                          double t_horizon, std::size_t n_paths, std::uint64_t seed,
                          const ExitOptions& options = {});

}  // namespace cutoff

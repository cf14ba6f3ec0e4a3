#include "cutoff/doublewell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cutoff/error.hpp"
#include "cutoff/semiflow.hpp"

namespace cutoff {

namespace {

double bisect_root(const Potential& p, double a, double b, double tol) {
  double fa = p.d1(a);
  for (int k = 0; k < 200 && b - a > tol; ++k) {
    const double m = 0.5 * (a + b);
    const double fm = p.d1(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  // Newton polish: the shifted potential at the root needs V'(x*) at rounding
  // level, since H has a pole at -V'(x*)/V''(x*).
  double x = 0.5 * (a + b);
  for (int k = 0; k < 4; ++k) {
    const double d2 = p.d2(x);
    if (d2 == 0.0) break;
    const double next = x - p.d1(x) / d2;
    if (!(std::abs(p.d1(next)) < std::abs(p.d1(x)))) break;
    x = next;
  }
  return x;
}

struct Critical {
  double x;
  bool minimum;
};

// Walks from the well in direction dir until V' changes sign (a maximum, the
// basin wall) or V passes `level`; returns the signed offset of the edge.
double basin_edge(const Potential& p, double xstar, double dir, double level, double step) {
  double u = 0.0;
  for (int k = 0; k < 2000000; ++k) {
    const double next = u + dir * step;
    const double x = xstar + next;
    if (dir * p.d1(x) <= 0.0) return next;  // reached the neighbouring maximum
    if (p.value(x) >= level) return 1.1 * next;
    u = next;
  }
  throw ValidationError("local_cutoff_experiment: the basin does not close");
}

}  // namespace

std::vector<WellDescriptor> find_wells(const Potential& p, double lo, double hi, double tol,
                                       int scan_points) {
  if (!(lo < hi)) throw ValidationError("find_wells: domain needs lo < hi");
  if (!(tol > 0.0)) throw ValidationError("find_wells: tol must be > 0");
  if (scan_points < 3) throw ValidationError("find_wells: need at least 3 scan points");

  const Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(scan_points, lo, hi);
  std::vector<Critical> crit;
  double prev = p.d1(x[0]);
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    const double cur = p.d1(x[i]);
    if (cur == 0.0 && i + 1 < x.size()) {
      // Root exactly on a node: classify by the neighbours.
      const double next = p.d1(x[i + 1]);
      if (prev < 0.0 && next > 0.0) crit.push_back({x[i], true});
      if (prev > 0.0 && next < 0.0) crit.push_back({x[i], false});
      if (next != 0.0) prev = next;
      continue;
    }
    if (prev != 0.0 && (prev < 0.0) != (cur < 0.0)) {
      crit.push_back({bisect_root(p, x[i - 1], x[i], tol), prev < 0.0});
    }
    if (cur != 0.0) prev = cur;
  }

  for (const auto& c : crit) {
    if (std::abs(p.d2(c.x)) <= 1e-8) {
      throw EngineError("find_wells: degenerate critical point near x = " + std::to_string(c.x));
    }
  }

  std::vector<WellDescriptor> wells;
  for (std::size_t i = 0; i < crit.size(); ++i) {
    if (!crit[i].minimum) continue;
    WellDescriptor w;
    w.location = crit[i].x;
    w.curvature = p.d2(w.location);
    const double v = p.value(w.location);
    for (std::size_t j : {i - 1, i + 1}) {
      if (j >= crit.size() || crit[j].minimum) continue;  // i - 1 wraps for i = 0
      const double barrier = p.value(crit[j].x) - v;
      if (barrier < w.barrier) {
        w.barrier = barrier;
        w.saddle = crit[j].x;
        w.saddle_distance = std::abs(crit[j].x - w.location);
      }
    }
    wells.push_back(w);
  }
  if (wells.empty()) throw ValidationError("find_wells: no strict local minimum on the domain");

  if (wells.size() > 1) {
    std::vector<double> depth;
    for (const auto& w : wells) depth.push_back(p.value(w.location));
    const double lowest = *std::min_element(depth.begin(), depth.end());
    const double highest = *std::max_element(depth.begin(), depth.end());
    const double scale = std::max(1.0, std::abs(lowest));
    for (std::size_t i = 0; i < wells.size(); ++i) {
      if (highest - lowest <= 1e-12 * scale) {
        wells[i].depth = WellDepth::equal;
      } else {
        wells[i].depth = depth[i] - lowest <= 1e-12 * scale ? WellDepth::deep : WellDepth::shallow;
      }
    }
  }
  return wells;
}

std::string to_string(CenterMode m) { return m == CenterMode::at_xstar ? "at_xstar" : "at_zero"; }

LocalCutoffTable local_cutoff_experiment(const Potential& p, const WellDescriptor& well, double x0,
                                         double gamma, const std::vector<double>& eps_list,
                                         const Eigen::ArrayXd& b_grid,
                                         const LocalCutoffOptions& options) {
  if (!(well.curvature > 0.0)) throw ValidationError("local_cutoff_experiment: V''(x*) must be > 0");
  const double u0 = x0 - well.location;
  if (u0 == 0.0) throw ValidationError("local_cutoff_experiment: x0 must differ from x*");
  const double radius = options.escape_radius_fraction * well.saddle_distance;
  if (std::isfinite(radius) && !(std::abs(u0) < radius)) {
    throw ValidationError("local_cutoff_experiment: x0 lies outside the exit radius of the well");
  }
  if (b_grid.size() == 0 || !b_grid.isFinite().all()) {
    throw ValidationError("local_cutoff_experiment: b grid must be finite and non-empty");
  }
  for (double eps : eps_list) {
    if (!(eps > 0.0 && eps < 1.0)) {
      throw ValidationError("local_cutoff_experiment: epsilon values must lie in (0, 1)");
    }
  }

  const Potential local = shifted(p, well.location);
  const double a = well.curvature;

  LocalCutoffTable table;
  table.well = well;
  table.x0 = x0;
  table.gamma = gamma;
  table.center = options.center;
  table.constant = limit_constants(local, u0).c_tilde;

  for (double eps : eps_list) {
    const auto general = schedule(a, eps, gamma, ScheduleMode::general);
    const auto literal = schedule(a, eps, gamma, ScheduleMode::local);
    require_positive_times(general, b_grid, false);

    // Basin in the shifted coordinate: up to the neighbouring maxima, or to
    // 1.1 times the level crossing where no maximum is near.
    const double sigma = std::sqrt(eps / (2.0 * a));
    const double level = local.value(u0) + 20.0 * eps;
    const double step = (std::abs(u0) + sigma) / 256.0;
    FpControls fp = options.fp;
    fp.lo = basin_edge(local, 0.0, -1.0, level, step);
    fp.hi = basin_edge(local, 0.0, 1.0, level, step);
    fp.L = 0.0;
    fp.curvature = a;
    fp.check_boundary = false;  // the saddle end is a reflecting wall by construction

    std::vector<double> times;
    for (Eigen::Index i = 0; i < b_grid.size(); ++i) {
      times.push_back(general.time(b_grid[i]));
      const double tl = literal.time(b_grid[i]);
      if (tl > 0.0) times.push_back(tl);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const Grid g = default_grid(local, eps, u0, fp);
    const double t_surrogate = 4.0 * g.h() * g.h() / eps;
    times.erase(std::remove_if(times.begin(), times.end(),
                               [&](double t) { return t < t_surrogate; }),
                times.end());
    const FpRun run = evolve(local, eps, u0, times, fp);
    table.grid = run.diagnostics.grid;

    const double center = options.center == CenterMode::at_xstar ? 0.0 : -well.location;
    const auto target = make_gaussian(center, sigma * sigma);
    auto distance_at = [&](double t) {
      const auto it = std::lower_bound(times.begin(), times.end(), t);
      if (it == times.end() || *it != t) return std::numeric_limits<double>::quiet_NaN();
      return tv_grid(run.snapshots[static_cast<std::size_t>(it - times.begin())], target);
    };

    double fraction = 0.0;
    if (std::isfinite(radius)) {
      const double horizon = std::max(general.time(b_grid.maxCoeff()),
                                      literal.time(b_grid.maxCoeff()));
      ExitOptions eo;
      eo.dt = options.escape_dt;
      eo.x0 = x0;
      eo.workers = options.workers;
      fraction = exit_time_stats(p, well, eps, radius, horizon, options.escape_paths,
                                 options.seed, eo)
                     .escape_fraction;
    }

    for (Eigen::Index i = 0; i < b_grid.size(); ++i) {
      LocalCutoffRow row;
      row.epsilon = eps;
      row.b = b_grid[i];
      row.t = general.time(row.b);
      row.distance = distance_at(row.t);
      row.t_local = literal.time(row.b);
      row.distance_local = distance_at(row.t_local);
      row.profile = profile(row.b, table.constant);
      row.escape_fraction = fraction;
      row.valid = fraction < options.escape_limit;
      table.rows.push_back(row);
    }
  }
  return table;
}

ExitStats regime_separation(const Potential& p, const WellDescriptor& well, double x0,
                            double epsilon, double gamma, double b, double factor,
                            std::size_t n_paths, std::uint64_t seed,
                            const LocalCutoffOptions& options) {
  if (!(factor > 0.0)) throw ValidationError("regime_separation: factor must be > 0");
  const auto s = schedule(well.curvature, epsilon, gamma, ScheduleMode::general);
  const double horizon = factor * s.time(b);
  if (!(horizon > 0.0)) throw ValidationError("regime_separation: t*(b) must be > 0");
  ExitOptions eo;
  eo.dt = options.escape_dt;
  eo.x0 = x0;
  eo.workers = options.workers;
  return exit_time_stats(p, well, epsilon, options.escape_radius_fraction * well.saddle_distance,
                         horizon, n_paths, seed, eo);
}

}  // namespace cutoff

#include "cutoff/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cutoff/error.hpp"

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace cutoff {

Eigen::ArrayXd Grid::weights() const {
  Eigen::ArrayXd w = Eigen::ArrayXd::Constant(n, h());
  w[0] *= 0.5;
  w[n - 1] *= 0.5;
  return w;
}

Grid make_grid(double lo, double hi, Eigen::Index n) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ValidationError("grid: need finite lo < hi");
  }
  if (n < 3) throw ValidationError("grid: need at least 3 nodes");
  return {lo, hi, n};
}

double DensityGrid::mass() const { return (grid.weights() * p).sum(); }

double DensityGrid::mean() const { return (grid.weights() * p * grid.nodes()).sum() / mass(); }

double StationaryDensity::normalizer() const { return std::exp(log_normalizer); }

StationaryDensity stationary_density(const Potential& pot, double epsilon, const Grid& grid) {
  if (!(epsilon > 0.0)) throw ValidationError("stationary_density: epsilon must be > 0");
  const Eigen::ArrayXd x = grid.nodes();
  Eigen::ArrayXd q(grid.n);
  for (Eigen::Index i = 0; i < grid.n; ++i) q[i] = -2.0 * pot.value(x[i]) / epsilon;
  const double top = q.maxCoeff();
  Eigen::ArrayXd e = (q - top).exp();
  const double s = (grid.weights() * e).sum();
  StationaryDensity out;
  out.density = {grid, e / s, 0.0};
  out.log_normalizer = top + std::log(s);
  return out;
}

StationaryDensity stationary_density(const Potential& pot, double epsilon, double L,
                                     Eigen::Index n) {
  if (!(L > 0.0)) throw ValidationError("stationary_density: L must be > 0");
  auto st = stationary_density(pot, epsilon, make_grid(-L, L, n));
  // Tail beyond a confining end: int_L^inf e^{-2V/eps} <= e^{-2V(L)/eps} eps / (2 V'(L)) for convex tails.
  for (double end : {-L, L}) {
    const double slope = pot.d1(end) * (end > 0 ? 1.0 : -1.0);
    if (!(slope > 0.0)) {
      throw ValidationError("stationary_density: V is not confining at x = " +
                            std::to_string(end) + "; the domain must reach the coercive tails");
    }
    const double log_tail = -2.0 * pot.value(end) / epsilon + std::log(epsilon / (2.0 * slope)) -
                            st.log_normalizer;
    if (log_tail > std::log(1e-12)) {
      throw ValidationError("stationary_density: tail mass outside [-L, L] is about " +
                            std::to_string(std::exp(log_tail)) + "; increase L");
    }
  }
  return st;
}

namespace {

// Density tails decay to subnormal values, which are two orders of magnitude
// slower on x86. Flushing them to zero changes nothing above 1e-308.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned int saved_;
#endif
};

double bernoulli(double x) { return x == 0.0 ? 1.0 : x / std::expm1(x); }

double curvature_of(const Potential& p, const FpControls& c) {
  const double a = std::isnan(c.curvature) ? p.d2(0.0) : c.curvature;
  if (!(a > 0.0)) {
    throw ValidationError("fokker_planck: curvature at the target minimum must be > 0");
  }
  return a;
}

// Point beyond `from` (in direction dir) where V first exceeds `level`.
double level_crossing(const Potential& p, double from, double dir, double level, double step) {
  double inner = from;
  double outer = from + dir * step;
  for (int k = 0; p.value(outer) < level; ++k) {
    if (k > 200) throw ValidationError("fokker_planck: V does not grow; cannot size the domain");
    inner = outer;
    step *= 2.0;
    outer = from + dir * step;
  }
  for (int k = 0; k < 80; ++k) {
    const double mid = 0.5 * (inner + outer);
    (p.value(mid) < level ? inner : outer) = mid;
  }
  return outer;
}

struct Operator {
  Eigen::ArrayXd lower, diag, upper, w;
};

Operator build_operator(const Potential& pot, double epsilon, const Grid& g) {
  const Eigen::ArrayXd x = g.nodes();
  const double h = g.h();
  const double k = epsilon / (2.0 * h);
  Operator op{Eigen::ArrayXd::Zero(g.n), Eigen::ArrayXd::Zero(g.n), Eigen::ArrayXd::Zero(g.n),
              g.weights()};
  Eigen::ArrayXd v(g.n);
  for (Eigen::Index i = 0; i < g.n; ++i) v[i] = pot.value(x[i]);
  // Flux J_{i+1/2} = k [B(D) p_i - B(-D) p_{i+1}],  D = 2 (V_{i+1} - V_i)/eps.
  for (Eigen::Index i = 0; i + 1 < g.n; ++i) {
    const double d = 2.0 * (v[i + 1] - v[i]) / epsilon;
    const double bp = k * bernoulli(d);
    const double bm = k * bernoulli(-d);
    op.diag[i] -= bp;
    op.upper[i] += bm;
    op.lower[i + 1] += bp;
    op.diag[i + 1] -= bm;
  }
  return op;
}

// One theta-step (W - theta k A) p' = (W + (1 - theta) k A) p, factorized once per (theta, k).
struct Stepper {
  const Operator& op;
  double theta = -1.0;
  double k = -1.0;
  Eigen::ArrayXd sub, cprime, inv_denom, el, ed, eu, rhs;

  void factor(double th, double step) {
    if (th == theta && step == k) return;
    theta = th;
    k = step;
    const auto n = op.w.size();
    sub = -th * step * op.lower;
    const double e = (1.0 - th) * step;
    el = e * op.lower;
    ed = op.w + e * op.diag;
    eu = e * op.upper;
    cprime.resize(n);
    inv_denom.resize(n);
    rhs.resize(n);
    double prev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double b = op.w[i] - th * step * op.diag[i];
      const double c = -th * step * op.upper[i];
      inv_denom[i] = 1.0 / (b - sub[i] * prev);
      prev = c * inv_denom[i];
      cprime[i] = prev;
    }
  }

  void step(Eigen::ArrayXd& p, double th, double step_size) {
    factor(th, step_size);
    const auto n = p.size();
    rhs[0] = ed[0] * p[0] + eu[0] * p[1];
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      rhs[i] = el[i] * p[i - 1] + ed[i] * p[i] + eu[i] * p[i + 1];
    }
    rhs[n - 1] = el[n - 1] * p[n - 2] + ed[n - 1] * p[n - 1];
    double prev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      prev = (rhs[i] - sub[i] * prev) * inv_denom[i];
      rhs[i] = prev;
    }
    p[n - 1] = rhs[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i) p[i] = rhs[i] - cprime[i] * p[i + 1];
  }
};

DensityGrid gaussian_on_grid(const Grid& g, double mean, double variance, double t) {
  const Eigen::ArrayXd x = g.nodes();
  Eigen::ArrayXd p = (-0.5 * (x - mean).square() / variance).exp();
  p /= (g.weights() * p).sum();
  return {g, p, t};
}

// Linearized law N(psi_t, eps Phi_t^2 I_t) at a short time t, by RK4 on (psi, Phi, I).
GaussianLaw short_time_law(const Potential& pot, double epsilon, double x0, double t) {
  constexpr int n = 64;
  const double k = t / n;
  Eigen::Vector3d y(x0, 1.0, 0.0);
  auto f = [&](const Eigen::Vector3d& s) {
    return Eigen::Vector3d(-pot.d1(s[0]), -pot.d2(s[0]) * s[1], 1.0 / (s[1] * s[1]));
  };
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d k1 = f(y);
    const Eigen::Vector3d k2 = f(y + 0.5 * k * k1);
    const Eigen::Vector3d k3 = f(y + 0.5 * k * k2);
    const Eigen::Vector3d k4 = f(y + k * k3);
    y += k / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return make_gaussian(y[0], epsilon * y[1] * y[1] * y[2]);
}

}  // namespace

Grid default_grid(const Potential& p, double epsilon, double x0, const FpControls& c) {
  if (!(epsilon > 0.0)) throw ValidationError("fokker_planck: epsilon must be > 0");
  double lo, hi;
  if (!std::isnan(c.lo) || !std::isnan(c.hi)) {
    lo = c.lo;
    hi = c.hi;
  } else if (c.L > 0.0) {
    lo = -c.L;
    hi = c.L;
  } else {
    const double a = curvature_of(p, c);
    const double sigma = std::sqrt(epsilon / (2.0 * a));
    const double level = p.value(x0) + 20.0 * epsilon;
    const double step = std::max(std::abs(x0), sigma) * 0.25;
    const double right = level_crossing(p, std::max(x0, 0.0), 1.0, level, step);
    const double left = level_crossing(p, std::min(x0, 0.0), -1.0, level, step);
    const double L = 1.1 * std::max(std::abs(left), std::abs(right));
    lo = -L;
    hi = L;
  }
  if (!(lo < hi)) throw ValidationError("fokker_planck: domain needs lo < hi");
  if (!(x0 > lo && x0 < hi)) throw ValidationError("fokker_planck: x0 must lie inside the domain");
  Eigen::Index n = c.n;
  if (n == 0) {
    const double sigma = std::sqrt(epsilon / (2.0 * curvature_of(p, c)));
    const double h = sigma / c.resolution;
    n = static_cast<Eigen::Index>(std::ceil((hi - lo) / h)) + 1;
    if (n > c.max_nodes) {
      throw ValidationError("fokker_planck: the default grid needs " + std::to_string(n) +
                            " nodes, above max_nodes = " + std::to_string(c.max_nodes));
    }
  }
  return make_grid(lo, hi, n);
}

double default_dt(const Potential& p, double epsilon, const Grid& g) {
  const Eigen::ArrayXd x = g.nodes();
  double vmax = 0.0;
  for (Eigen::Index i = 0; i < g.n; ++i) vmax = std::max(vmax, std::abs(p.d1(x[i])));
  const double h = g.h();
  double dt = h * h / epsilon;
  if (vmax > 0.0) dt = std::min(dt, h / vmax);
  return 0.5 * dt;
}

FpRun evolve_from(const Potential& pot, double epsilon, const DensityGrid& initial,
                  const std::vector<double>& times, double dt, bool check_boundary) {
  if (!(epsilon > 0.0)) throw ValidationError("evolve: epsilon must be > 0");
  const Grid& g = initial.grid;
  if (dt == 0.0) dt = default_dt(pot, epsilon, g);
  if (!(dt > 0.0)) throw ValidationError("evolve: dt must be > 0");

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return times[i] < times[j]; });
  for (double t : times) {
    if (!(t >= initial.t) || !std::isfinite(t)) {
      throw ValidationError("evolve: snapshot time " + std::to_string(t) +
                            " precedes the start time " + std::to_string(initial.t));
    }
  }

  const Operator op = build_operator(pot, epsilon, g);
  const FlushDenormals flush;
  Stepper stepper{op, -1.0, -1.0, {}, {}, {}, {}, {}, {}, {}};
  FpRun run;
  run.snapshots.resize(times.size());
  auto& diag = run.diagnostics;
  diag.grid = g;
  diag.dt = dt;
  diag.t_start = initial.t;
  diag.min_density = std::numeric_limits<double>::infinity();

  Eigen::ArrayXd p = initial.p;
  const double mass0 = initial.mass();
  const double h = g.h();
  double t = initial.t;
  int startup = 4;  // backward-Euler half steps damp the non-smooth start

  for (auto idx : order) {
    const double target = times[idx];
    while (target - t > 1e-12 * std::max(1.0, target)) {
      if (startup > 0) {
        const double k = std::min(0.5 * dt, target - t);
        stepper.step(p, 1.0, k);
        t += k;
        --startup;
      } else {
        double k = std::min(dt, target - t);
        if (target - t - k < 1e-3 * dt) k = target - t;
        stepper.step(p, 0.5, k);
        t += k;
      }
      ++diag.steps;
    }
    t = target;

    const DensityGrid snap{g, p, t};
    const double drift = std::abs(snap.mass() - mass0);
    const double pmin = p.minCoeff() * h;
    const double boundary = std::max(p[0], p[g.n - 1]);
    diag.max_mass_drift = std::max(diag.max_mass_drift, drift);
    diag.min_density = std::min(diag.min_density, pmin);
    diag.max_boundary = std::max(diag.max_boundary, boundary);
    if (!p.allFinite()) throw NonFiniteError("evolve: non-finite density");
    if (pmin < -1e-12) {
      throw EngineError("evolve: negative density " + std::to_string(pmin) + " at t = " +
                        std::to_string(t) + "; the scheme failed");
    }
    if (drift > 1e-10 * std::max(1.0, t - initial.t)) {
      throw EngineError("evolve: mass drifted by " + std::to_string(drift));
    }
    if (check_boundary && boundary >= 1e-12) {
      throw EngineError("evolve: density " + std::to_string(boundary) +
                        " reached the domain boundary at t = " + std::to_string(t) +
                        "; enlarge the domain");
    }
    run.snapshots[idx] = snap;
  }
  return run;
}

namespace {

FpRun evolve_single(const Potential& pot, double epsilon, double x0,
                    const std::vector<double>& times, const Grid& g, double dt,
                    bool check_boundary) {
  const double h = g.h();
  const double t0 = 4.0 * h * h / epsilon;

  std::vector<double> later;
  std::vector<std::size_t> later_idx;
  std::vector<DensityGrid> snaps(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] == 0.0) {
      snaps[i] = gaussian_on_grid(g, x0, 4.0 * h * h, 0.0);
    } else if (times[i] >= t0) {
      later.push_back(times[i]);
      later_idx.push_back(i);
    } else {
      throw ValidationError("evolve: snapshot time " + std::to_string(times[i]) +
                            " lies before the surrogate start " + std::to_string(t0));
    }
  }

  const auto start_law = short_time_law(pot, epsilon, x0, t0);
  const DensityGrid initial = gaussian_on_grid(g, start_law.mean, start_law.variance, t0);
  FpRun run = evolve_from(pot, epsilon, initial, later, dt, check_boundary);
  for (std::size_t j = 0; j < later.size(); ++j) snaps[later_idx[j]] = run.snapshots[j];
  run.snapshots = std::move(snaps);
  return run;
}

}  // namespace

FpRun evolve(const Potential& pot, double epsilon, double x0, const std::vector<double>& times,
             const FpControls& controls) {
  const Grid g = default_grid(pot, epsilon, x0, controls);
  const double dt = controls.dt > 0.0 ? controls.dt : default_dt(pot, epsilon, g);
  if (!controls.extrapolate) {
    return evolve_single(pot, epsilon, x0, times, g, dt, controls.check_boundary);
  }

  // Both error sources are second order, so halving h and dt together scales
  // the error by 1/4 and (4 fine - coarse)/3 cancels the leading term.
  const Grid fine_grid{g.lo, g.hi, 2 * g.n - 1};
  FpRun coarse = evolve_single(pot, epsilon, x0, times, g, dt, controls.check_boundary);
  const FpRun fine =
      evolve_single(pot, epsilon, x0, times, fine_grid, 0.5 * dt, controls.check_boundary);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] == 0.0) continue;
    auto& c = coarse.snapshots[i].p;
    const auto& f = fine.snapshots[i].p;
    for (Eigen::Index k = 0; k < g.n; ++k) c[k] = (4.0 * f[2 * k] - c[k]) / 3.0;
  }
  auto& d = coarse.diagnostics;
  const auto& e = fine.diagnostics;
  d.steps += e.steps;
  d.max_mass_drift = std::max(d.max_mass_drift, e.max_mass_drift);
  d.min_density = std::min(d.min_density, e.min_density);
  d.max_boundary = std::max(d.max_boundary, e.max_boundary);
  d.extrapolated = true;
  return coarse;
}

double tv_grid(const DensityGrid& a, const DensityGrid& b) {
  if (!(a.grid == b.grid) || a.p.size() != b.p.size()) {
    throw ValidationError("tv_grid: densities live on different grids");
  }
  const double tv = 0.5 * (a.grid.weights() * (a.p - b.p).abs()).sum();
  return std::clamp(tv, 0.0, 1.0);
}

double tv_grid(const DensityGrid& a, const GaussianLaw& law) {
  const Eigen::ArrayXd x = a.grid.nodes();
  Eigen::ArrayXd q(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) q[i] = law.pdf(x[i]);
  const double outside = law.cdf(a.grid.lo) + (1.0 - law.cdf(a.grid.hi));
  const double tv = 0.5 * (a.grid.weights() * (a.p - q).abs()).sum() + 0.5 * outside;
  return std::clamp(tv, 0.0, 1.0);
}

double invariantes_gap(const Potential& p, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("invariantes_gap: epsilon must be > 0");
  const double a = p.d2(0.0);
  if (!(a > 0.0)) throw ValidationError("invariantes_gap: V''(0) must be > 0");
  const double sigma = std::sqrt(epsilon / (2.0 * a));
  const auto reference = make_gaussian(0.0, sigma * sigma);
  const double level = 30.0 * epsilon;
  const double L = std::max({level_crossing(p, 0.0, 1.0, level, sigma),
                             -level_crossing(p, 0.0, -1.0, level, sigma), 12.0 * sigma});
  Eigen::Index n = static_cast<Eigen::Index>(std::ceil(2.0 * L / (sigma / 8.0))) + 1;
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int level_k = 0; level_k < 14; ++level_k) {
    const auto mu = stationary_density(p, epsilon, make_grid(-L, L, n));
    const double gap = tv_grid(mu.density, reference);
    if (std::abs(gap - previous) < 1e-5) return gap;
    previous = gap;
    n = 2 * n - 1;
  }
  throw EngineError("invariantes_gap: grid refinement did not stabilize");
}

DistanceSeries general_distance_curve(const Potential& p, double epsilon, double x0,
                                      const CutoffSchedule& s, const Eigen::ArrayXd& b_grid,
                                      const FpControls& controls, FpDiagnostics* diagnostics) {
  require_positive_times(s, b_grid, true);
  DistanceSeries out;
  out.convention = DistanceConvention::general;
  out.b = b_grid;
  out.t.resize(b_grid.size());
  out.d.resize(b_grid.size());
  std::vector<double> times(static_cast<std::size_t>(b_grid.size()));
  for (Eigen::Index i = 0; i < b_grid.size(); ++i) {
    out.t[i] = s.shifted_time(b_grid[i]);
    times[static_cast<std::size_t>(i)] = out.t[i];
  }
  const auto run = evolve(p, epsilon, x0, times, controls);
  const auto mu = stationary_density(p, epsilon, run.diagnostics.grid);
  for (Eigen::Index i = 0; i < b_grid.size(); ++i) {
    out.d[i] = tv_grid(run.snapshots[static_cast<std::size_t>(i)], mu.density);
  }
  if (diagnostics) *diagnostics = run.diagnostics;
  return out;
}

double self_convergence(const Potential& p, double epsilon, double x0,
                        const std::vector<double>& times, const FpControls& controls,
                        const std::function<double(const DensityGrid&)>& functional) {
  FpControls coarse = controls;
  const Grid g = default_grid(p, epsilon, x0, controls);
  coarse.lo = g.lo;
  coarse.hi = g.hi;
  coarse.n = g.n;
  if (coarse.dt == 0.0) coarse.dt = default_dt(p, epsilon, g);
  FpControls fine = coarse;
  fine.n = 2 * g.n - 1;
  fine.max_nodes = std::max(fine.max_nodes, fine.n);
  fine.dt = 0.5 * coarse.dt;

  const auto a = evolve(p, epsilon, x0, times, coarse);
  const auto b = evolve(p, epsilon, x0, times, fine);
  double worst = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    worst = std::max(worst, std::abs(functional(a.snapshots[i]) - functional(b.snapshots[i])));
  }
  return worst;
}

}  // namespace cutoff

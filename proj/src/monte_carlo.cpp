#include "cutoff/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cutoff/error.hpp"
#include "cutoff/parallel.hpp"
#include "cutoff/rng.hpp"
#include "cutoff/semiflow.hpp"

namespace cutoff {

std::vector<double> record_grid(double t_end, int n_records) {
  if (!(t_end > 0.0) || n_records < 1) throw ValidationError("record_grid: need t_end > 0, n >= 1");
  std::vector<double> t(static_cast<std::size_t>(n_records) + 1);
  for (int k = 0; k <= n_records; ++k) t[static_cast<std::size_t>(k)] = t_end * k / n_records;
  return t;
}

PathEnsemble simulate_coupled(const Potential& p, double epsilon, double x0, double dt,
                              const std::vector<double>& record_times, std::size_t n_paths,
                              std::uint64_t seed, const SimulationOptions& options) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("simulate_coupled: epsilon must be >= 0");
  }
  if (!(dt > 0.0)) throw ValidationError("simulate_coupled: dt must be > 0");
  if (n_paths == 0) throw ValidationError("simulate_coupled: need at least one path");

  std::vector<double> times{0.0};
  for (double t : record_times) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw ValidationError("simulate_coupled: record times must be finite and >= 0");
    }
    if (t <= times.back()) {
      if (t == times.back()) continue;
      throw ValidationError("simulate_coupled: record times must be increasing");
    }
    times.push_back(t);
  }

  const double domain = options.domain > 0.0 ? options.domain : 2.0 * std::max(std::abs(x0), 1.0);
  if (!(std::abs(x0) < domain)) throw ValidationError("simulate_coupled: x0 outside the domain");
  double k2 = 0.0;
  for (int i = 0; i <= 2000; ++i) k2 = std::max(k2, std::abs(p.d2(-domain + domain * i / 1000.0)));
  if (!(dt * k2 < 0.1)) {
    throw ValidationError("simulate_coupled: dt * max|V''| = " + std::to_string(dt * k2) +
                          " on [-" + std::to_string(domain) + ", " + std::to_string(domain) +
                          "]; need < 0.1");
  }

  // Substep layout, shared by all paths.
  const auto n_rec = static_cast<Eigen::Index>(times.size());
  std::vector<int> substeps(times.size(), 0);
  std::vector<double> step_times{0.0};
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double gap = times[k] - times[k - 1];
    const int m = std::max(1, static_cast<int>(std::ceil(gap / dt - 1e-9)));
    substeps[k] = m;
    for (int j = 1; j <= m; ++j) {
      step_times.push_back(j == m ? times[k] : times[k - 1] + gap * j / m);
    }
  }

  std::vector<double> psi(step_times.size(), 0.0);
  if (x0 != 0.0) {
    const auto traj = integrate_semiflow(p, x0, times.back(), 1e-10, step_times);
    for (std::size_t i = 0; i < step_times.size(); ++i) psi[i] = sample(traj, step_times[i]).psi;
  }
  std::vector<double> curv(step_times.size());
  for (std::size_t i = 0; i < step_times.size(); ++i) curv[i] = p.d2(psi[i]);

  PathEnsemble e;
  e.seed = seed;
  e.epsilon = epsilon;
  e.x0 = x0;
  e.dt = dt;
  e.times = Eigen::Map<const Eigen::ArrayXd>(times.data(), n_rec);
  e.psi.resize(n_rec);
  const auto rows = static_cast<Eigen::Index>(n_paths);
  e.x.resize(rows, n_rec);
  e.y.resize(rows, n_rec);
  e.w.resize(rows, n_rec);
  e.running_max.resize(rows, n_rec);

  std::size_t idx = 0;
  for (Eigen::Index k = 0; k < n_rec; ++k) {
    idx += static_cast<std::size_t>(substeps[static_cast<std::size_t>(k)]);
    e.psi[k] = psi[idx];
  }

  const double sqrt_eps = std::sqrt(epsilon);
  constexpr std::size_t chunk = 64;
  const std::size_t n_chunks = (n_paths + chunk - 1) / chunk;
  parallel_for(n_chunks, options.workers, [&](std::size_t c) {
    for (std::size_t path = c * chunk; path < std::min(n_paths, (c + 1) * chunk); ++path) {
      PhiloxStream rng(seed, path);
      const auto r = static_cast<Eigen::Index>(path);
      double x = x0, y = 0.0, w = 0.0, b = 0.0;
      e.x(r, 0) = x;
      e.y(r, 0) = y;
      e.w(r, 0) = w;
      e.running_max(r, 0) = b;
      std::size_t s = 0;
      for (Eigen::Index k = 1; k < n_rec; ++k) {
        const int m = substeps[static_cast<std::size_t>(k)];
        const double h = (times[static_cast<std::size_t>(k)] - times[static_cast<std::size_t>(k - 1)]) / m;
        const double sh = std::sqrt(h);
        for (int j = 0; j < m; ++j, ++s) {
          const double dw = sh * rng.normal();
          x += -p.d1(x) * h + sqrt_eps * dw;
          y += -curv[s] * y * h + dw;
          w += dw;
          b = std::max(b, std::abs(w));
          if (!(std::abs(x) < domain)) {
            throw EngineError("simulate_coupled: path " + std::to_string(path) + " reached x = " +
                              std::to_string(x) + " at t = " + std::to_string(step_times[s + 1]) +
                              ", outside the verified domain [-" + std::to_string(domain) +
                              ", " + std::to_string(domain) + "]");
          }
        }
        e.x(r, k) = x;
        e.y(r, k) = y;
        e.w(r, k) = w;
        e.running_max(r, k) = b;
      }
    }
  });
  return e;
}

BoundReport check_order_bounds(const PathEnsemble& e, double kappa2, double kappa3) {
  if (!(kappa2 >= 0.0) || !(kappa3 >= 0.0)) {
    throw ValidationError("check_order_bounds: kappas must be >= 0");
  }
  BoundReport r;
  r.kappa2 = kappa2;
  r.kappa3 = kappa3;
  const double se = std::sqrt(e.epsilon);
  for (Eigen::Index k = 1; k < e.times.size(); ++k) {
    const double t = e.times[k];
    const double slack = 5.0 * std::sqrt(e.epsilon * e.dt) * (1.0 + t);
    const double grow = kappa2 * t + 1.0;
    r.max_slack = std::max(r.max_slack, slack);
    for (Eigen::Index i = 0; i < e.paths(); ++i) {
      const double b = e.running_max(i, k);
      const double dev0 = std::abs(e.x(i, k) - e.psi[k]);
      const double dev1 = std::abs(e.x(i, k) - e.psi[k] - se * e.y(i, k));
      const double zeroth = se * b * grow + slack;
      const double first = kappa3 == 0.0 ? slack
                                          : e.epsilon * b * b * kappa3 * grow * grow * grow * t + slack;
      const double first_sq = kappa3 == 0.0 ? slack
                                             : e.epsilon * b * b * kappa3 * grow * grow * t + slack;
      ++r.checks;
      if (dev0 > zeroth) ++r.zeroth_violations;
      if (dev1 > first) ++r.first_violations;
      if (dev1 > first_sq) ++r.first_violations_squared;
      r.worst_zeroth_margin = std::min(r.worst_zeroth_margin, zeroth - dev0);
      r.worst_first_margin = std::min(r.worst_first_margin, first - dev1);
    }
  }
  return r;
}

Eigen::ArrayXd samples_at(const PathEnsemble& e, Eigen::Index k) {
  if (k < 0 || k >= e.times.size()) throw ValidationError("samples_at: record index out of range");
  return e.x.col(k).array();
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Cumulative distribution of a reference law at x.
struct ReferenceCdf {
  const Reference& ref;
  Eigen::ArrayXd cumulative;  // trapezoid integral at the grid nodes, normalized
  double total = 1.0;

  explicit ReferenceCdf(const Reference& r) : ref(r) {
    if (const auto* g = std::get_if<DensityGrid>(&ref)) {
      const auto n = g->grid.n;
      const double h = g->grid.h();
      cumulative.resize(n);
      cumulative[0] = 0.0;
      for (Eigen::Index i = 1; i < n; ++i) {
        cumulative[i] = cumulative[i - 1] + 0.5 * h * (g->p[i - 1] + g->p[i]);
      }
      total = cumulative[n - 1];
      if (!(total > 0.0)) throw ValidationError("empirical_tv: reference density has no mass");
    }
  }

  double operator()(double x) const {
    if (const auto* law = std::get_if<GaussianLaw>(&ref)) return law->cdf(x);
    const auto& g = std::get<DensityGrid>(ref);
    if (x <= g.grid.lo) return 0.0;
    if (x >= g.grid.hi) return 1.0;
    const double h = g.grid.h();
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>((x - g.grid.lo) / h), g.grid.n - 2);
    const double s = x - (g.grid.lo + static_cast<double>(i) * h);
    const double part = g.p[i] * s + (g.p[i + 1] - g.p[i]) * s * s / (2.0 * h);
    return (cumulative[i] + part) / total;
  }
};

// Bin masses of a law plus the mass outside the binned range (last entry).
Eigen::ArrayXd binned_masses(const Reference& ref, const Eigen::ArrayXd& edges) {
  const ReferenceCdf cdf(ref);
  const auto bins = edges.size() - 1;
  Eigen::ArrayXd m(bins + 1);
  double inside = 0.0;
  double prev = cdf(edges[0]);
  for (Eigen::Index j = 0; j < bins; ++j) {
    const double next = cdf(edges[j + 1]);
    m[j] = std::max(0.0, next - prev);
    inside += m[j];
    prev = next;
  }
  m[bins] = std::max(0.0, 1.0 - inside);
  return m;
}

double plug_in(const Eigen::ArrayXd& counts, double n, const Eigen::ArrayXd& ref) {
  return 0.5 * (counts / n - ref).abs().sum();
}

}  // namespace

EmpiricalDensity histogram(const Eigen::ArrayXd& samples) {
  const auto n = static_cast<std::size_t>(samples.size());
  if (n < 2) throw ValidationError("histogram: need at least two samples");
  if (!samples.allFinite()) throw ValidationError("histogram: non-finite sample");
  std::vector<double> v(samples.data(), samples.data() + n);
  std::sort(v.begin(), v.end());
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  const double lo = v.front();
  const double range = v.back() - lo;
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
  if (!(width > 0.0)) width = range > 0.0 ? range / std::sqrt(static_cast<double>(n)) : 1.0;
  const auto bins = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(range / width)));

  EmpiricalDensity h;
  h.n = n;
  h.edges = lo + width * Eigen::ArrayXd::LinSpaced(bins + 1, 0.0, static_cast<double>(bins));
  h.counts = Eigen::ArrayXd::Zero(bins);
  for (double x : v) {
    const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>((x - lo) / width), bins - 1);
    h.counts[j] += 1.0;
  }
  h.heights = h.counts / (static_cast<double>(n) * width);
  return h;
}

TvEstimate empirical_tv(const Eigen::ArrayXd& samples, const Reference& reference,
                        const TvOptions& options) {
  if (samples.size() < 10000) {
    throw ValidationError("empirical_tv: need at least 1e4 samples, got " +
                          std::to_string(samples.size()));
  }
  if (options.bootstrap < 2) throw ValidationError("empirical_tv: need >= 2 bootstrap replicates");
  const auto hist = histogram(samples);
  const auto bins = hist.counts.size();
  const double n = static_cast<double>(hist.n);
  const double width = hist.edges[1] - hist.edges[0];

  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(bins + 1);
  counts.head(bins) = hist.counts;
  const Eigen::ArrayXd ref = binned_masses(reference, hist.edges);

  TvEstimate out;
  out.n = hist.n;
  out.bins = static_cast<std::size_t>(bins);
  out.estimate = plug_in(counts, n, ref);

  // Nonparametric bootstrap over the samples.
  std::vector<Eigen::Index> bin_of(hist.n);
  for (std::size_t i = 0; i < hist.n; ++i) {
    bin_of[i] = std::min<Eigen::Index>(
        static_cast<Eigen::Index>((samples[static_cast<Eigen::Index>(i)] - hist.edges[0]) / width),
        bins - 1);
  }
  Eigen::ArrayXd reps(options.bootstrap);
  Eigen::ArrayXd c(bins + 1);
  for (int r = 0; r < options.bootstrap; ++r) {
    PhiloxStream rng(options.seed, static_cast<std::uint64_t>(r));
    c.setZero();
    for (std::size_t i = 0; i < hist.n; ++i) {
      const auto pick = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * n), hist.n - 1);
      c[bin_of[pick]] += 1.0;
    }
    reps[r] = plug_in(c, n, ref);
  }
  out.standard_error = std::sqrt((reps - reps.mean()).square().sum() / (options.bootstrap - 1));

  // Parametric bootstrap of the plug-in statistic under the null law.
  const Eigen::ArrayXd null = options.null_law ? binned_masses(*options.null_law, hist.edges) : ref;
  std::vector<double> cum(static_cast<std::size_t>(bins + 1));
  double acc = 0.0;
  for (Eigen::Index j = 0; j <= bins; ++j) cum[static_cast<std::size_t>(j)] = (acc += null[j]);
  double expected = 0.0;
  for (int r = 0; r < options.bootstrap; ++r) {
    PhiloxStream rng(options.seed ^ 0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(r));
    c.setZero();
    for (std::size_t i = 0; i < hist.n; ++i) {
      const double u = rng.uniform() * acc;
      const auto j = std::min<std::size_t>(
          static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()),
          static_cast<std::size_t>(bins));
      c[static_cast<Eigen::Index>(j)] += 1.0;
    }
    expected += plug_in(c, n, ref);
  }
  out.expected = expected / options.bootstrap;
  const double null_tv = 0.5 * (null - ref).abs().sum();
  out.debiased = std::clamp(out.estimate - out.expected + null_tv, 0.0, 1.0);
  return out;
}

ExitStats exit_time_stats(const Potential& p, const WellDescriptor& well, double epsilon,
                          double radius, double t_horizon, std::size_t n_paths,
                          std::uint64_t seed, const ExitOptions& options) {
  if (!(well.curvature > 0.0)) throw ValidationError("exit_time_stats: the well must be strict");
  if (!(radius > 0.0 && radius < well.saddle_distance)) {
    throw ValidationError("exit_time_stats: radius must lie in (0, distance to the saddle)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("exit_time_stats: epsilon must be > 0");
  if (!(t_horizon >= 0.0)) throw ValidationError("exit_time_stats: horizon must be >= 0");
  if (!(options.dt > 0.0)) throw ValidationError("exit_time_stats: dt must be > 0");
  if (n_paths == 0) throw ValidationError("exit_time_stats: need at least one path");
  const double start = options.x0.value_or(well.location);
  if (!(std::abs(start - well.location) <= radius)) {
    throw ValidationError("exit_time_stats: start lies outside the exit radius");
  }

  const auto steps = static_cast<std::size_t>(std::ceil(t_horizon / options.dt - 1e-9));
  const double h = steps ? t_horizon / static_cast<double>(steps) : 0.0;
  const double noise = std::sqrt(epsilon * h);
  std::vector<double> exit(n_paths, std::numeric_limits<double>::infinity());
  parallel_for(n_paths, options.workers, [&](std::size_t path) {
    PhiloxStream rng(seed, path);
    double x = start;
    for (std::size_t s = 1; s <= steps; ++s) {
      x += -p.d1(x) * h + noise * rng.normal();
      if (std::abs(x - well.location) > radius) {
        exit[path] = static_cast<double>(s) * h;
        break;
      }
    }
  });

  ExitStats st;
  st.paths = n_paths;
  st.escaped = static_cast<std::size_t>(std::count_if(exit.begin(), exit.end(),
                                                      [](double t) { return std::isfinite(t); }));
  st.escape_fraction = static_cast<double>(st.escaped) / static_cast<double>(n_paths);
  std::sort(exit.begin(), exit.end());
  st.quantile_levels = options.quantile_levels;
  for (double q : options.quantile_levels) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("exit_time_stats: quantile levels in (0,1)");
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n_paths))) - 1;
    st.quantiles.push_back(std::isfinite(exit[k]) ? exit[k]
                                                  : std::numeric_limits<double>::quiet_NaN());
  }
  return st;
}

}  // namespace cutoff

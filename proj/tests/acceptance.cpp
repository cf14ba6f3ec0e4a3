// Acceptance run: one PASS/FAIL line per criterion, tolerances as pinned in
// the README. `--only N` runs a single criterion; `--expect-fail N` keeps a
// known failure from setting the exit code (the line still reads FAIL).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cutoff/doublewell.hpp"
#include "cutoff/experiments.hpp"
#include "cutoff/fokker_planck.hpp"
#include "cutoff/gaussian.hpp"
#include "cutoff/linearized.hpp"
#include "cutoff/monte_carlo.hpp"
#include "cutoff/semiflow.hpp"
#include "oracles.hpp"

using namespace cutoff;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const char* what, double value, double tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s=%.3e (tol %.1e)", detail.empty() ? "" : "; ", what, value,
                  tol);
    detail += buf;
    if (!ok) pass = false;
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt_list(const std::vector<double>& v) {
  std::string s = "[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.4g", i ? ", " : "", v[i]);
    s += buf;
  }
  return s + "]";
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

// 1. Closed-form TV suite.
Outcome closed_form_tv() {
  Outcome o;
  const double oracle_value = oracle::tv_normal_quadrature(2.0, 1.0, 0.0, 1.0, 2000000);
  o.require(std::abs(tv_unit(2.0) - oracle_value) <= 1e-10, "|tv_unit(2)-quadrature|",
            std::abs(tv_unit(2.0) - oracle_value), 1e-10);
  o.require(std::abs(tv_unit(2.0) - 0.6826895) <= 5e-8, "|tv_unit(2)-0.6826895|",
            std::abs(tv_unit(2.0) - 0.6826895), 5e-8);

  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> mu(-50.0, 50.0);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double m = mu(gen);
    if (tv_unit(m) > std::abs(m) / std::sqrt(2.0 * std::numbers::pi)) ++violations;
  }
  o.require(violations == 0, "bound violations/1e4", violations, 0);

  std::uniform_real_distribution<double> u(-3, 3), v(0.05, 5);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const GaussianLaw a{u(gen), v(gen)}, b{u(gen), v(gen)};
    const double s = v(gen), c = u(gen);
    const double base = tv_normal(a, b);
    worst = std::max(worst, std::abs(tv_normal({s * a.mean + c, s * s * a.variance},
                                               {s * b.mean + c, s * s * b.variance}) - base));
    worst = std::max(worst, std::abs(tv_normal({a.mean + c, a.variance}, {b.mean + c, b.variance}) -
                                     base));
  }
  o.require(worst <= 1e-12, "invariance max dev", worst, 1e-12);
  return o;
}

// 2. Semiflow constants.
Outcome semiflow_constants() {
  Outcome o;
  const auto q = limit_constants(quadratic(1.0), 1.0);
  o.require(std::abs(q.c_tilde - 1.0) <= 1e-10 && std::abs(q.c - 1.0) <= 1e-10,
            "quadratic |c~-x0|+|c-1|", std::abs(q.c_tilde - 1.0) + std::abs(q.c - 1.0), 1e-10);
  const auto k = limit_constants(quartic(), 1.0);
  o.require(std::abs(k.c_tilde - 1.0 / std::sqrt(2.0)) <= 1e-8, "quartic |c~-2^-1/2|",
            std::abs(k.c_tilde - 1.0 / std::sqrt(2.0)), 1e-8);
  const double rel = std::abs(k.c_tilde_extrapolated - k.c_tilde) / k.c_tilde;
  o.require(rel <= 1e-6, "quadrature vs extrapolation rel", rel, 1e-6);
  for (const auto& p : {quadratic(1.0), quartic()}) {
    const auto tr = integrate_semiflow(p, 1.0, 20.0, 1e-11);
    const auto pt = sample(tr, 20.0);
    const double dev = std::abs(pt.phi * pt.phi * pt.integral - 0.5);
    o.require(dev <= 1e-4, (p.id() + " |Phi^2 I - 1/2V''(0)| at t=20").c_str(), dev, 1e-4);
  }
  return o;
}

// 3. Linearized cut-off.
Outcome linearized_cutoff() {
  Outcome o;
  const Eigen::ArrayXd b = Eigen::ArrayXd::LinSpaced(121, -6, 6);
  const auto q = profile_convergence(quadratic(1.0), 1.0, 1.0, 0.5, {1e-6}, b);
  o.require(q.sup_error[0] < 1e-3, "quadratic sup|d-G| eps=1e-6", q.sup_error[0], 1e-3);
  const auto k = profile_convergence(quartic(), 1.0, 1.0, 0.5, {1e-2, 1e-3, 1e-4}, b,
                                     ProfileMode::linearized, 3);
  const bool dec = strictly_decreasing(k.sup_error);
  o.note("quartic sup errors " + fmt_list(k.sup_error) + (dec ? " decreasing" : " NOT decreasing"));
  if (!dec) o.pass = false;
  return o;
}

// 4. Fokker-Planck oracle equivalence.
Outcome fokker_planck_oracle() {
  Outcome o;
  const double eps = 1e-2;
  const std::vector<double> times{0.5, 1.0, 2.0, 5.0};
  const auto run = evolve(quadratic(1.0), eps, 1.0, times);
  double worst = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto exact = make_gaussian(oracle::ou_mean(1.0, 1.0, times[i]),
                                     oracle::ou_variance(1.0, eps, times[i]));
    worst = std::max(worst, tv_grid(run.snapshots[i], exact));
  }
  o.require(worst < 5e-4, "max TV to OU (eps=1e-2)", worst, 5e-4);

  const auto mu = stationary_density(quadratic(1.0), eps, run.diagnostics.grid);
  const auto moved = evolve_from(quadratic(1.0), eps, mu.density, {1.0});
  const double drift = tv_grid(moved.snapshots[0], mu.density);
  o.require(drift < 1e-8, "stationary TV move", drift, 1e-8);

  const double change = self_convergence(
      quadratic(1.0), eps, 1.0, times, FpControls{}, [&](const DensityGrid& d) {
        return tv_grid(d, make_gaussian(oracle::ou_mean(1.0, 1.0, d.t),
                                        oracle::ou_variance(1.0, eps, d.t)));
      });
  o.require(change < 1e-4, "halving change", change, 1e-4);
  return o;
}

// 5. General-case profile.
Outcome general_profile() {
  Outcome o;
  const auto p = quartic();
  const double c_tilde = limit_constants(p, 1.0).c_tilde;
  std::vector<double> sup;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const auto s = schedule(1.0, eps, 0.5, ScheduleMode::general);
    std::vector<double> b;
    for (int i = 0; i <= 16; ++i) {
      const double v = -4.0 + 0.5 * i;
      if (s.shifted_time(v) > 0.0) b.push_back(v);
    }
    const auto series = general_distance_curve(
        p, eps, 1.0, s, Eigen::Map<const Eigen::ArrayXd>(b.data(), static_cast<Eigen::Index>(b.size())));
    double e = 0.0;
    for (Eigen::Index i = 0; i < series.b.size(); ++i) {
      e = std::max(e, std::abs(series.d[i] - profile(series.b[i], c_tilde)));
    }
    sup.push_back(e);
  }
  o.require(sup[2] < 2e-2, "sup|D-G| eps=1e-4", sup[2], 2e-2);
  const bool dec = strictly_decreasing(sup);
  o.note("sup errors " + fmt_list(sup) + (dec ? " decreasing" : " NOT decreasing"));
  if (!dec) o.pass = false;
  return o;
}

// 6. Gap between the Gibbs measure and its Gaussian approximation.
Outcome invariant_gap() {
  Outcome o;
  std::vector<double> gaps, quad;
  for (double eps : {0.5, 0.1, 0.02, 1e-3}) {
    gaps.push_back(invariantes_gap(quartic(), eps));
    quad.push_back(invariantes_gap(quadratic(1.0), eps));
  }
  const bool dec = strictly_decreasing(gaps);
  o.note("quartic gaps " + fmt_list(gaps) + (dec ? " decreasing" : " NOT decreasing"));
  if (!dec) o.pass = false;
  o.require(gaps.back() < 0.05, "quartic gap eps=1e-3", gaps.back(), 0.05);
  const double qmax = *std::max_element(quad.begin(), quad.end());
  o.require(qmax <= 1e-12, "quadratic max gap", qmax, 1e-12);
  return o;
}

// 7. Pathwise bounds.
Outcome pathwise_bounds() {
  Outcome o;
  const auto vm = smooth_truncate(quartic(), 4.0);
  const auto tr = *vm.traits();
  std::vector<double> scaled;
  std::size_t zeroth = 0, first = 0, others = 0;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const auto e = simulate_coupled(vm, eps, 1.0, 1e-3, record_grid(5.0, 500), 1000, 7);
    const auto r = check_order_bounds(e, tr.kappa2, tr.kappa3);
    if (eps == 1e-3) {
      zeroth = r.zeroth_violations;
      first = r.first_violations;
    } else {
      others += r.zeroth_violations + r.first_violations;
    }
    scaled.push_back(r.worst_zeroth_margin / std::sqrt(eps));
  }
  o.require(zeroth == 0, "zeroth-order violations (eps=1e-3)", static_cast<double>(zeroth), 0);
  o.require(first == 0, "first-order (cubed) violations (eps=1e-3)", static_cast<double>(first), 0);
  const double lo = *std::min_element(scaled.begin(), scaled.end());
  const double hi = *std::max_element(scaled.begin(), scaled.end());
  o.require(lo > 0 && hi / lo <= 2.0, "margin/sqrt(eps) spread", hi / lo, 2.0);
  o.note("margin/sqrt(eps) " + fmt_list(scaled) + ", violations at eps=1e-2,1e-4: " +
         std::to_string(others));
  return o;
}

// 8. Truncation equivalence.
Outcome truncation_equivalence() {
  Outcome o;
  const auto v = quartic();
  const double M = 1.25;  // beyond max(|x0|, sup|psi|) = 1
  const auto vm = smooth_truncate(v, M);
  const double eps = 1e-3;
  const auto s = schedule(1.0, eps, 0.5, ScheduleMode::general);
  FpControls c;
  c.L = 2.0 * M + 0.1;  // the grid reaches where V_M'' is already flat
  std::vector<double> bs;
  for (int i = 0; i <= 16; ++i) {
    if (s.shifted_time(-4.0 + 0.5 * i) > 0.0) bs.push_back(-4.0 + 0.5 * i);
  }
  const Eigen::Map<const Eigen::ArrayXd> b(bs.data(), static_cast<Eigen::Index>(bs.size()));
  const auto d = general_distance_curve(v, eps, 1.0, s, b, c);
  const auto dm = general_distance_curve(vm, eps, 1.0, s, b, c);
  const double dev = (d.d - dm.d).abs().maxCoeff();
  o.require(dev < 1e-4, "max|D_V - D_VM| eps=1e-3, M=1.25", dev, 1e-4);
  return o;
}

// 9. Double-well local cut-off.
Outcome local_cutoff() {
  Outcome o;
  const auto p = double_well(1.0);
  const auto wells = find_wells(p, -3, 3);
  const auto& w = wells[1];
  const double eps = 1e-3, x0 = 1.3;
  LocalCutoffOptions opts;
  opts.escape_paths = 2000;
  opts.seed = 11;

  const auto s = schedule(w.curvature, eps, 0.5, ScheduleMode::general);
  ExitOptions eo;
  eo.x0 = x0;
  const auto early = exit_time_stats(p, w, eps, 0.9 * w.saddle_distance, s.time(8.0), 2000, 11, eo);
  o.require(early.escape_fraction < 0.01, "escape fraction to t*(8)", early.escape_fraction, 0.01);

  const auto table = local_cutoff_experiment(p, w, x0, 0.5, {eps},
                                             Eigen::ArrayXd::LinSpaced(25, -3, 3), opts);
  double sup = 0.0, sup_literal = 0.0;
  for (const auto& r : table.rows) {
    sup = std::max(sup, std::abs(r.distance - r.profile));
    sup_literal = std::max(sup_literal, std::abs(r.distance_local - r.profile));
  }
  o.require(sup < 3e-2, "sup|d_local-G(c(x*))| b in [-3,3]", sup, 3e-2);
  char buf[96];
  std::snprintf(buf, sizeof buf, "literal-schedule sup=%.3e, c(x*)=%.6f", sup_literal, table.constant);
  o.note(buf);

  const auto late = regime_separation(p, w, x0, eps, 0.5, 8.0, 10.0, 2000, 13, opts);
  // Fewer than half the paths out by 10 t*(8) puts the median exit beyond it.
  o.require(late.escape_fraction < 0.5, "escape fraction by 10 t*(8)", late.escape_fraction, 0.5);
  return o;
}

// 10. Determinism of the ensemble engine.
Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const std::string text = R"(
potential: {id: quartic}
x0: 1.0
epsilon: [1.0e-2, 1.0e-3]
b: [-1, 0, 1, 2]
engines: [mc]
workers: 2
mc: {seed: 424242, paths: 500, tv_paths: 10000, t_end: 5.0, records: 50, bootstrap: 50}
)";
  const auto base = fs::temp_directory_path() / "cutoff_acceptance_determinism";
  fs::remove_all(base);
  const auto config = parse_config(text);
  run(config, Command::mc, {(base / "a").string(), false});
  run(config, Command::mc, {(base / "b").string(), false});
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int differing = 0;
  for (const char* f : {"mc_bounds.csv", "mc_distance.csv"}) {
    const auto x = slurp(base / "a" / f), y = slurp(base / "b" / f);
    if (x.empty() || x != y) ++differing;
  }
  o.require(differing == 0, "differing CSV files", differing, 0);
  fs::remove_all(base);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expected_failures;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) only.insert(std::atoi(argv[++i]));
    if (!std::strcmp(argv[i], "--expect-fail") && i + 1 < argc) {
      expected_failures.insert(std::atoi(argv[++i]));
    }
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"closed-form TV suite", closed_form_tv},
      {"semiflow constants", semiflow_constants},
      {"linearized cut-off", linearized_cutoff},
      {"Fokker-Planck oracle equivalence", fokker_planck_oracle},
      {"general-case profile", general_profile},
      {"Gibbs vs Gaussian gap", invariant_gap},
      {"pathwise bounds", pathwise_bounds},
      {"truncation equivalence", truncation_equivalence},
      {"double-well local cut-off", local_cutoff},
      {"ensemble determinism", determinism},
  };

  int unexpected = 0, failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool known = expected_failures.count(id) > 0;
    std::printf("[%s] %2d %s: %s (%.1fs)%s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first,
                out.detail.c_str(), secs,
                !out.pass && known ? " [known failure, see README]" : "");
    std::fflush(stdout);
    if (!out.pass) {
      ++failed;
      if (!known) ++unexpected;
    }
  }
  std::printf("%d criteria failed, %d unexpected\n", failed, unexpected);
  return unexpected == 0 ? 0 : 1;
}

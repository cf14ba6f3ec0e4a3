#include "cutoff/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cutoff/error.hpp"
#include "cutoff/fokker_planck.hpp"
#include "cutoff/monte_carlo.hpp"
#include "cutoff/semiflow.hpp"

#ifndef CUTOFF_VERSION
#define CUTOFF_VERSION "dev"
#endif

namespace cutoff {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(std::size_t n) { return std::to_string(n); }
std::string fmt(bool b) { return b ? "1" : "0"; }

FpControls fp_controls(const ExperimentConfig& c) {
  FpControls f;
  f.resolution = c.fp.resolution;
  f.n = c.fp.n;
  f.dt = c.fp.dt;
  f.extrapolate = c.fp.extrapolate;
  return f;
}

std::vector<double> sorted_b(const ExperimentConfig& c) {
  std::vector<double> b = c.b;
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

Eigen::ArrayXd to_array(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// b values whose t*(b) is positive; the rest are reported as warnings.
std::vector<double> positive_b(const CutoffSchedule& s, const std::vector<double>& b,
                               std::vector<std::string>& warnings) {
  std::vector<double> kept;
  for (double v : b) {
    if (s.shifted_time(v) > 0.0) {
      kept.push_back(v);
    } else {
      warnings.push_back("epsilon " + format_number(s.epsilon) + ": b = " + format_number(v) +
                         " dropped, t*(b) <= 0");
    }
  }
  return kept;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EngineError("cannot write " + path.string());
  out << text;
  if (!out) throw EngineError("write failed for " + path.string());
}

std::uint64_t mc_seed(const ExperimentConfig& c) { return c.mc.seed.value_or(1); }

// --- commands -------------------------------------------------------------

const WellDescriptor& nearest_well(const std::vector<WellDescriptor>& wells, double x) {
  return *std::min_element(wells.begin(), wells.end(), [x](const auto& u, const auto& v) {
    return std::abs(u.location - x) < std::abs(v.location - x);
  });
}

void run_constants(const ExperimentConfig& c, CommandResult& r) {
  Potential p = build_potential(c.potential);
  double x = c.x0;
  if (c.potential.id == "doublewell") {
    // Constants of the selected well, in coordinates centred on it.
    const auto wells = find_wells(p, -c.doublewell.domain, c.doublewell.domain);
    const auto& well = nearest_well(wells, c.doublewell.well);
    r.manifest.diagnostics["well"] = well.location;
    x -= well.location;
    p = shifted(p, well.location);
  }
  const auto k = limit_constants(p, x);
  CsvTable t;
  t.columns = {"potential", "x0", "curvature", "c_tilde", "c", "c_tilde_extrapolated",
               "c_extrapolated", "disagreement", "variance_limit"};
  t.add({p.id(), format_number(c.x0), format_number(k.curvature), format_number(k.c_tilde),
         format_number(k.c), format_number(k.c_tilde_extrapolated),
         format_number(k.c_extrapolated), format_number(k.disagreement),
         format_number(k.variance_limit)});
  r.tables["constants.csv"] = std::move(t);
  r.manifest.diagnostics["method"] = k.method;
  r.manifest.diagnostics["cross_check"] = k.cross_check;
}

void run_profile(const ExperimentConfig& c, CommandResult& r) {
  const Potential p = build_potential(c.potential);
  const auto table = profile_convergence(p, c.x0, c.y0, c.gamma, c.epsilons,
                                         to_array(sorted_b(c)), c.profile_mode, c.workers);
  CsvTable t;
  t.columns = {"epsilon", "b", "t", "distance", "profile", "flagged"};
  std::size_t flagged = 0;
  for (const auto& row : table.rows) {
    flagged += row.flagged;
    t.add({format_number(row.epsilon), format_number(row.b), format_number(row.t),
           format_number(row.distance), format_number(row.profile), fmt(row.flagged)});
  }
  r.tables["profile.csv"] = std::move(t);
  auto& d = r.manifest.diagnostics;
  d["mode"] = c.profile_mode == ProfileMode::linearized ? "linearized" : "first_order";
  d["constant"] = table.constant;
  d["sup_error"] = nlohmann::json::array();
  for (std::size_t i = 0; i < table.epsilons.size(); ++i) {
    d["sup_error"].push_back({{"epsilon", table.epsilons[i]}, {"sup", table.sup_error[i]}});
  }
  if (flagged) {
    r.manifest.warnings.push_back(std::to_string(flagged) +
                                  " row(s) flagged: scheduled time not positive");
  }
}

void run_fp(const ExperimentConfig& c, CommandResult& r) {
  const Potential p = build_potential(c.potential);
  const double a = p.d2(0.0);
  const double c_tilde = limit_constants(p, c.x0).c_tilde;
  const auto b_all = sorted_b(c);
  CsvTable t;
  t.columns = {"epsilon", "b", "t", "distance", "profile"};
  auto& diag = r.manifest.diagnostics;
  diag["c_tilde"] = c_tilde;
  diag["schedule"] = "general: t*(b) = t_eps + b (1/a + eps^gamma)";
  diag["runs"] = nlohmann::json::array();
  for (double eps : c.epsilons) {
    const auto s = schedule(a, eps, c.gamma, ScheduleMode::general);
    const auto b = positive_b(s, b_all, r.manifest.warnings);
    if (b.empty()) continue;
    try {
      FpDiagnostics fd;
      const auto series = general_distance_curve(p, eps, c.x0, s, to_array(b), fp_controls(c), &fd);
      for (Eigen::Index i = 0; i < series.b.size(); ++i) {
        t.add({format_number(eps), format_number(series.b[i]), format_number(series.t[i]),
               format_number(series.d[i]), format_number(profile(series.b[i], c_tilde))});
      }
      diag["runs"].push_back({{"epsilon", eps},
                              {"nodes", fd.grid.n},
                              {"lo", fd.grid.lo},
                              {"hi", fd.grid.hi},
                              {"dt", fd.dt},
                              {"steps", fd.steps},
                              {"max_mass_drift", fd.max_mass_drift},
                              {"min_density", fd.min_density},
                              {"max_boundary", fd.max_boundary},
                              {"extrapolated", fd.extrapolated}});
    } catch (const EngineError& e) {
      r.manifest.errors.push_back("fp, epsilon " + format_number(eps) + ": " + e.what());
    }
  }
  r.tables["fp.csv"] = std::move(t);
}

std::pair<double, double> bound_constants(const Potential& p, double domain,
                                          std::vector<std::string>& warnings) {
  if (p.traits() && std::isfinite(p.traits()->kappa2) && std::isfinite(p.traits()->kappa3)) {
    return {p.traits()->kappa2, p.traits()->kappa3};
  }
  const auto cl = classify(p, -domain, domain, 4001);
  warnings.push_back("kappa2/kappa3 are not finite on the real line; using probe values on the "
                     "simulation domain");
  return {cl.kappa2, cl.kappa3};
}

void run_mc(const ExperimentConfig& c, CommandResult& r) {
  const Potential p = build_potential(c.potential);
  const double a = p.d2(0.0);
  const std::uint64_t seed = mc_seed(c);
  SimulationOptions so;
  so.workers = c.workers;
  const double domain = 2.0 * std::max(std::abs(c.x0), 1.0);
  const auto [k2, k3] = bound_constants(p, domain, r.manifest.warnings);

  CsvTable bounds;
  bounds.columns = {"epsilon", "checks", "zeroth_violations", "first_violations",
                    "first_violations_squared", "worst_zeroth_margin", "worst_first_margin",
                    "max_slack", "kappa2", "kappa3"};
  CsvTable curve;
  curve.columns = {"epsilon", "b", "t", "estimate", "standard_error", "expected", "debiased",
                   "bins", "profile"};
  const double c_tilde = limit_constants(p, c.x0).c_tilde;
  const auto b_all = sorted_b(c);

  for (double eps : c.epsilons) {
    try {
      const auto e = simulate_coupled(p, eps, c.x0, c.mc.dt, record_grid(c.mc.t_end, c.mc.records),
                                      c.mc.paths, seed, so);
      const auto br = check_order_bounds(e, k2, k3);
      bounds.add({format_number(eps), fmt(br.checks), fmt(br.zeroth_violations),
                  fmt(br.first_violations), fmt(br.first_violations_squared),
                  format_number(br.worst_zeroth_margin), format_number(br.worst_first_margin),
                  format_number(br.max_slack), format_number(k2), format_number(k3)});

      const auto s = schedule(a, eps, c.gamma, ScheduleMode::general);
      const auto b = positive_b(s, b_all, r.manifest.warnings);
      if (b.empty()) continue;
      std::vector<double> times;
      for (double v : b) times.push_back(s.shifted_time(v));
      const auto ens = simulate_coupled(p, eps, c.x0, c.mc.dt, times, c.mc.tv_paths, seed + 1, so);
      const Grid g = default_grid(p, eps, c.x0, fp_controls(c));
      const auto mu = stationary_density(p, eps, g);
      const auto traj = integrate_semiflow(p, c.x0, times.back(), 1e-10, times);
      TvOptions to;
      to.bootstrap = c.mc.bootstrap;
      to.seed = seed + 2;
      for (std::size_t i = 0; i < b.size(); ++i) {
        // Binning bias is estimated under the first-order Gaussian law.
        to.null_law = first_order_law(traj, eps, times[i]).gaussian();
        const auto tv = empirical_tv(samples_at(ens, static_cast<Eigen::Index>(i + 1)),
                                     mu.density, to);
        curve.add({format_number(eps), format_number(b[i]), format_number(times[i]),
                   format_number(tv.estimate), format_number(tv.standard_error),
                   format_number(tv.expected), format_number(tv.debiased), fmt(tv.bins),
                   format_number(profile(b[i], c_tilde))});
      }
    } catch (const EngineError& e) {
      r.manifest.errors.push_back("mc, epsilon " + format_number(eps) + ": " + e.what());
    }
  }
  r.tables["mc_bounds.csv"] = std::move(bounds);
  r.tables["mc_distance.csv"] = std::move(curve);
  r.manifest.diagnostics["seed"] = seed;
  r.manifest.diagnostics["slack"] = "5 sqrt(eps dt) (1 + t)";
  r.manifest.diagnostics["first_order_bound"] =
      "cubed exponent (k2 t + 1)^3 checked; squared form reported";
}

void run_doublewell(const ExperimentConfig& c, CommandResult& r) {
  const Potential p = build_potential(c.potential);
  const auto wells = find_wells(p, -c.doublewell.domain, c.doublewell.domain);
  const auto& well = nearest_well(wells, c.doublewell.well);
  LocalCutoffOptions o;
  o.center = c.doublewell.center;
  o.fp = fp_controls(c);
  o.escape_paths = c.doublewell.escape_paths;
  o.seed = mc_seed(c);
  o.workers = c.workers;
  const auto table =
      local_cutoff_experiment(p, well, c.x0, c.gamma, c.epsilons, to_array(sorted_b(c)), o);

  CsvTable t;
  t.columns = {"epsilon", "b", "t", "distance", "t_local", "distance_local", "profile",
               "escape_fraction", "valid", "center_mode"};
  std::size_t invalid = 0;
  for (const auto& row : table.rows) {
    invalid += !row.valid;
    t.add({format_number(row.epsilon), format_number(row.b), format_number(row.t),
           format_number(row.distance), format_number(row.t_local),
           format_number(row.distance_local), format_number(row.profile),
           format_number(row.escape_fraction), fmt(row.valid), to_string(table.center)});
  }
  r.tables["doublewell.csv"] = std::move(t);

  auto& d = r.manifest.diagnostics;
  d["well"] = {{"location", well.location},   {"curvature", well.curvature},
               {"barrier", well.barrier},     {"saddle", well.saddle},
               {"depth", static_cast<int>(well.depth)}};
  d["constant"] = table.constant;
  d["regime_separation"] = nlohmann::json::array();
  for (double eps : c.epsilons) {
    const auto st = regime_separation(p, well, c.x0, eps, c.gamma, 8.0, 10.0,
                                      c.doublewell.escape_paths, mc_seed(c) + 1, o);
    d["regime_separation"].push_back({{"epsilon", eps},
                                      {"horizon_factor", 10.0},
                                      {"b", 8.0},
                                      {"escape_fraction", st.escape_fraction},
                                      {"median_exit", st.quantiles[1]}});
  }
  r.manifest.warnings.push_back(
      "schedule: both the general form (with ln 2V''(x*)) and the literal local form are "
      "reported; center_mode = " + to_string(table.center));
  if (invalid) {
    r.manifest.warnings.push_back(std::to_string(invalid) +
                                  " row(s) invalid: escape fraction above the limit");
  }
}

void run_compare(const ExperimentConfig& c, CommandResult& r) {
  const auto report = compare_engines(c);
  CsvTable t;
  t.columns = {"epsilon", "b", "t", "analytic", "fp", "mc", "mc_se"};
  for (const auto& row : report.rows) {
    t.add({format_number(row.epsilon), format_number(row.b), format_number(row.t),
           format_number(row.analytic), format_number(row.fp), format_number(row.mc),
           format_number(row.mc_se)});
  }
  CsvTable pairs;
  pairs.columns = {"epsilon", "pair", "max_deviation", "tolerance", "pass", "self_convergence"};
  for (const auto& pr : report.pairs) {
    pairs.add({format_number(pr.epsilon), pr.pair, format_number(pr.max_deviation),
               format_number(pr.tolerance), fmt(pr.pass), format_number(pr.self_convergence)});
  }
  r.tables["compare.csv"] = std::move(t);
  r.tables["compare_pairs.csv"] = std::move(pairs);
  r.manifest.diagnostics["pass"] = report.pass();
  for (const auto& e : report.errors) r.manifest.errors.push_back(e);
  for (const auto& pr : report.pairs) {
    if (!pr.pass) {
      r.manifest.warnings.push_back("compare " + pr.pair + " failed at epsilon " +
                                    format_number(pr.epsilon));
    }
  }
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "constants") return Command::constants;
  if (name == "profile") return Command::profile;
  if (name == "fp") return Command::fp;
  if (name == "mc") return Command::mc;
  if (name == "doublewell") return Command::doublewell;
  if (name == "compare") return Command::compare;
  throw ValidationError("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::constants: return "constants";
    case Command::profile: return "profile";
    case Command::fp: return "fp";
    case Command::mc: return "mc";
    case Command::doublewell: return "doublewell";
    case Command::compare: return "compare";
  }
  return "unknown";
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw EngineError("csv: row width does not match the header");
  rows.push_back(std::move(row));
}

std::string CsvTable::render(const std::string& config_hash, const std::string& command) const {
  std::string out = "# config_hash=" + config_hash + " command=" + command + "\n";
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(columns);
  for (const auto& row : rows) line(row);
  return out;
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},
          {"config_hash", config_hash},
          {"version", version},
          {"config", nlohmann::json::parse(config)},
          {"outputs", outputs},
          {"timings", timings},
          {"diagnostics", diagnostics},
          {"warnings", warnings},
          {"errors", errors},
          {"status", status}};
}

CommandResult execute(const ExperimentConfig& config, Command command) {
  const auto errors = validate(config);
  if (!errors.empty()) {
    std::string msg = "config has " + std::to_string(errors.size()) + " error(s):";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  CommandResult r;
  r.manifest.command = to_string(command);
  r.manifest.config_hash = config_hash(config);
  r.manifest.version = CUTOFF_VERSION;
  r.manifest.config = canonical(config);
  switch (command) {
    case Command::constants: run_constants(config, r); break;
    case Command::profile: run_profile(config, r); break;
    case Command::fp: run_fp(config, r); break;
    case Command::mc: run_mc(config, r); break;
    case Command::doublewell: run_doublewell(config, r); break;
    case Command::compare: run_compare(config, r); break;
  }
  r.manifest.status = r.manifest.errors.empty() ? 0 : 2;
  return r;
}

RunManifest run(const ExperimentConfig& config, Command command, const RunOptions& options) {
  const fs::path dir = options.out_dir.empty() ? fs::path(config.out) : fs::path(options.out_dir);
  const std::string name = to_string(command);
  const fs::path manifest_path = dir / (name + ".manifest.json");
  if (!options.force && fs::exists(manifest_path)) {
    throw ValidationError("outputs of '" + name + "' already exist in " + dir.string() +
                          "; pass --force to overwrite");
  }

  const auto start = Clock::now();
  CommandResult r = execute(config, command);
  r.manifest.timings["total"] = seconds_since(start);

  // Single serialized emitter: every file is written here, after the engines finish.
  fs::create_directories(dir);
  for (const auto& [file, table] : r.tables) {
    const fs::path path = dir / file;
    if (!options.force && fs::exists(path)) {
      throw ValidationError(path.string() + " already exists; pass --force to overwrite");
    }
    write_file(path, table.render(r.manifest.config_hash, name));
    r.manifest.outputs.push_back(file);
  }
  write_file(manifest_path, r.manifest.to_json().dump(2) + "\n");
  return r.manifest;
}

bool CompareReport::pass() const {
  return errors.empty() && std::all_of(pairs.begin(), pairs.end(), [](const auto& p) {
           return p.pass;
         });
}

CompareReport compare_engines(const ExperimentConfig& c) {
  const bool use_a = c.uses("analytic"), use_f = c.uses("fp"), use_m = c.uses("mc");
  if (use_a + use_f + use_m < 2) {
    throw ValidationError("compare needs at least two engines in the config");
  }
  const Potential p = build_potential(c.potential);
  const double a = p.d2(0.0);
  const auto b_all = sorted_b(c);
  const FpControls controls = fp_controls(c);
  SimulationOptions so;
  so.workers = c.workers;

  CompareReport report;
  std::vector<std::string> ignored;
  for (double eps : c.epsilons) {
    const auto s = schedule(a, eps, c.gamma, ScheduleMode::general);
    const auto b = positive_b(s, b_all, ignored);
    if (b.empty()) continue;
    std::vector<double> times;
    for (double v : b) times.push_back(s.shifted_time(v));
    const std::size_t first = report.rows.size();
    for (std::size_t i = 0; i < b.size(); ++i) {
      CompareRow row;
      row.epsilon = eps;
      row.b = b[i];
      row.t = times[i];
      report.rows.push_back(row);
    }
    auto at = [&](std::size_t i) -> CompareRow& { return report.rows[first + i]; };

    std::vector<GaussianLaw> analytic_laws;
    if (use_a) {
      try {
        const auto traj = integrate_semiflow(p, c.x0, times.back(), 1e-10, times);
        for (std::size_t i = 0; i < b.size(); ++i) {
          at(i).analytic = first_order_distance(traj, eps, times[i]);
          analytic_laws.push_back(first_order_law(traj, eps, times[i]).gaussian());
        }
      } catch (const EngineError& e) {
        report.errors.push_back("analytic, epsilon " + format_number(eps) + ": " + e.what());
      }
    }

    std::optional<FpRun> fp_run;
    std::optional<StationaryDensity> mu;
    try {
      const Grid g = default_grid(p, eps, c.x0, controls);
      mu = stationary_density(p, eps, g);
      if (use_f) {
        fp_run = evolve(p, eps, c.x0, times, controls);
        for (std::size_t i = 0; i < b.size(); ++i) {
          at(i).fp = tv_grid(fp_run->snapshots[i], mu->density);
        }
      }
    } catch (const EngineError& e) {
      report.errors.push_back("fp, epsilon " + format_number(eps) + ": " + e.what());
    }

    if (use_m && mu) {
      try {
        const auto ens =
            simulate_coupled(p, eps, c.x0, c.mc.dt, times, c.mc.tv_paths, mc_seed(c) + 1, so);
        TvOptions to;
        to.bootstrap = c.mc.bootstrap;
        to.seed = mc_seed(c) + 2;
        for (std::size_t i = 0; i < b.size(); ++i) {
          // The law the samples should follow sets the binning bias.
          if (fp_run) {
            to.null_law = fp_run->snapshots[i];
          } else if (!analytic_laws.empty()) {
            to.null_law = analytic_laws[i];
          }
          const auto tv = empirical_tv(samples_at(ens, static_cast<Eigen::Index>(i + 1)),
                                       mu->density, to);
          at(i).mc = tv.debiased;
          at(i).mc_se = tv.standard_error;
        }
      } catch (const EngineError& e) {
        report.errors.push_back("mc, epsilon " + format_number(eps) + ": " + e.what());
      }
    }

    auto add_pair = [&](const std::string& name, auto get_x, auto get_y, bool use_se,
                        double tol) {
      ComparePair pr;
      pr.pair = name;
      pr.epsilon = eps;
      pr.tolerance = tol;
      pr.pass = true;
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double x = get_x(at(i)), y = get_y(at(i));
        const double dev = std::abs(x - y);
        if (!std::isfinite(dev)) {
          pr.pass = false;
          pr.max_deviation = std::numeric_limits<double>::quiet_NaN();
          break;
        }
        // The bootstrap SE collapses when the law sits far from the reference
        // (TV near 1); counts cannot resolve probabilities below 1/N.
        const double se = std::max(at(i).mc_se, 1.0 / static_cast<double>(c.mc.tv_paths));
        const double scaled = use_se ? dev / se : dev;
        pr.max_deviation = std::max(pr.max_deviation, scaled);
      }
      if (pr.pass) pr.pass = pr.max_deviation <= tol;
      return pr;
    };
    auto get_a = [](const CompareRow& r) { return r.analytic; };
    auto get_f = [](const CompareRow& r) { return r.fp; };
    auto get_m = [](const CompareRow& r) { return r.mc; };

    if (use_a && use_f) {
      auto pr = add_pair("analytic-fp", get_a, get_f, false, 5e-3);
      if (!pr.pass && fp_run) {
        try {
          pr.self_convergence = self_convergence(
              p, eps, c.x0, times, controls, [&](const DensityGrid& d) {
                return tv_grid(d, stationary_density(p, eps, d.grid).density);
              });
        } catch (const std::exception& e) {
          report.errors.push_back("self-convergence, epsilon " + format_number(eps) + ": " +
                                  e.what());
        }
      }
      report.pairs.push_back(pr);
    }
    if (use_f && use_m) report.pairs.push_back(add_pair("fp-mc", get_f, get_m, true, 3.0));
    if (use_a && use_m && !use_f) {
      report.pairs.push_back(add_pair("analytic-mc", get_a, get_m, true, 3.0));
    }
  }
  return report;
}

}  // namespace cutoff

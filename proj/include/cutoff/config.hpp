#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/doublewell.hpp"
#include "cutoff/linearized.hpp"
#include "cutoff/potential.hpp"

namespace cutoff {

struct PotentialSpec {
  std::string id = "quadratic";  // quadratic | quartic | doublewell
  double alpha = 1.0;            // quadratic
  double a = 1.0;                // doublewell
  double tilt = 0.0;             // doublewell
  std::optional<double> truncate;  // M for smooth_truncate
};

struct FpConfig {
  double resolution = 24.0;
  long n = 0;
  double dt = 0.0;
  bool extrapolate = true;
};

struct McConfig {
  std::size_t paths = 1000;        // bound-check ensemble
  std::size_t tv_paths = 20000;    // distance-curve ensemble
  double dt = 1e-3;
  std::optional<std::uint64_t> seed;
  double t_end = 5.0;
  int records = 50;
  int bootstrap = 200;
};

struct DoublewellConfig {
  double domain = 3.0;             // wells searched on [-domain, domain]
  double well = 1.0;               // the well nearest to this point is used
  CenterMode center = CenterMode::at_xstar;
  std::size_t escape_paths = 2000;
};

struct ExperimentConfig {
  PotentialSpec potential;
  double x0 = 1.0;
  double y0 = 1.0;
  std::vector<double> epsilons;
  double gamma = 0.5;
  std::vector<double> b;
  std::vector<std::string> engines{"analytic"};
  ProfileMode profile_mode = ProfileMode::linearized;
  FpConfig fp;
  McConfig mc;
  DoublewellConfig doublewell;
  int workers = 1;
  std::string out = "out";

  bool uses(const std::string& engine) const;
};

/// Parses a YAML config. Unknown keys, type errors and constraint violations
/// are all collected and reported in one ValidationError. `seed` overrides
/// mc.seed before validation.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::uint64_t> seed = std::nullopt);
ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed = std::nullopt);

/// Every violated constraint, empty when the config is valid.
std::vector<std::string> validate(const ExperimentConfig& c);

/// Canonical text form of a config; the hash is FNV-1a 64 over it.
std::string canonical(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

Potential build_potential(const PotentialSpec& s);

}  // namespace cutoff

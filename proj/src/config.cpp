#include "cutoff/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "cutoff/error.hpp"

namespace cutoff {

namespace {

// Collects errors while reading a YAML map with known keys.
class Reader {
 public:
  Reader(const YAML::Node& node, std::string prefix, std::vector<std::string>& errors)
      : node_(node), prefix_(std::move(prefix)), errors_(errors) {
    if (node_ && !node_.IsMap()) error("", "must be a mapping");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap() || !node_[key]) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      error(key, "has the wrong type");
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    T value{};
    seen_.insert(key);
    if (!node_ || !node_.IsMap() || !node_[key]) return;
    try {
      value = node_[key].as<T>();
      out = value;
    } catch (const YAML::Exception&) {
      error(key, "has the wrong type");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node();
    return node_[key];
  }

  void error(const std::string& key, const std::string& what) {
    errors_.push_back((key.empty() ? prefix_ : qualified(key)) + " " + what);
  }

  std::string qualified(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  void reject_unknown() {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) error(key, "is not a recognised key");
    }
  }

 private:
  YAML::Node node_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

std::vector<double> read_b_grid(const YAML::Node& node, std::vector<std::string>& errors) {
  if (!node) return {};
  try {
    if (node.IsSequence()) return node.as<std::vector<double>>();
    if (node.IsMap()) {
      Reader r(node, "b", errors);
      double from = 0.0, to = 0.0;
      int count = 0;
      r.get("from", from);
      r.get("to", to);
      r.get("count", count);
      r.reject_unknown();
      if (count < 2) {
        errors.push_back("b.count must be >= 2");
        return {};
      }
      std::vector<double> b(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) b[i] = from + (to - from) * i / (count - 1);
      return b;
    }
  } catch (const YAML::Exception&) {
  }
  errors.push_back("b must be a list of numbers or {from, to, count}");
  return {};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

bool ExperimentConfig::uses(const std::string& engine) const {
  return std::find(engines.begin(), engines.end(), engine) != engines.end();
}

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config: not valid YAML: ") + e.what());
  }
  ExperimentConfig c;
  std::vector<std::string> errors;
  Reader top(root, "", errors);

  {
    Reader r(top.child("potential"), "potential", errors);
    r.get("id", c.potential.id);
    r.get("alpha", c.potential.alpha);
    r.get("a", c.potential.a);
    r.get("tilt", c.potential.tilt);
    r.get("truncate", c.potential.truncate);
    r.reject_unknown();
  }
  top.get("x0", c.x0);
  top.get("y0", c.y0);
  top.get("epsilon", c.epsilons);
  top.get("gamma", c.gamma);
  c.b = read_b_grid(top.child("b"), errors);
  top.get("engines", c.engines);
  std::string mode = "linearized";
  top.get("profile_mode", mode);
  if (mode == "linearized") {
    c.profile_mode = ProfileMode::linearized;
  } else if (mode == "first_order") {
    c.profile_mode = ProfileMode::first_order;
  } else {
    errors.push_back("profile_mode must be linearized or first_order");
  }
  top.get("workers", c.workers);
  top.get("out", c.out);

  {
    Reader r(top.child("fp"), "fp", errors);
    r.get("resolution", c.fp.resolution);
    r.get("n", c.fp.n);
    r.get("dt", c.fp.dt);
    r.get("extrapolate", c.fp.extrapolate);
    r.reject_unknown();
  }
  {
    Reader r(top.child("mc"), "mc", errors);
    r.get("paths", c.mc.paths);
    r.get("tv_paths", c.mc.tv_paths);
    r.get("dt", c.mc.dt);
    r.get("seed", c.mc.seed);
    r.get("t_end", c.mc.t_end);
    r.get("records", c.mc.records);
    r.get("bootstrap", c.mc.bootstrap);
    r.reject_unknown();
  }
  {
    Reader r(top.child("doublewell"), "doublewell", errors);
    r.get("domain", c.doublewell.domain);
    r.get("well", c.doublewell.well);
    std::string center = "at_xstar";
    r.get("center", center);
    if (center == "at_xstar") {
      c.doublewell.center = CenterMode::at_xstar;
    } else if (center == "at_zero") {
      c.doublewell.center = CenterMode::at_zero;
    } else {
      errors.push_back("doublewell.center must be at_xstar or at_zero");
    }
    r.get("escape_paths", c.doublewell.escape_paths);
    r.reject_unknown();
  }
  top.reject_unknown();
  if (seed) c.mc.seed = seed;

  for (auto& e : validate(c)) errors.push_back(std::move(e));
  if (!errors.empty()) {
    std::string msg = "config has " + std::to_string(errors.size()) + " error(s):";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), seed);
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> e;
  const auto& p = c.potential;
  if (p.id != "quadratic" && p.id != "quartic" && p.id != "doublewell") {
    e.push_back("potential.id must be quadratic, quartic or doublewell");
  }
  if (p.id == "quadratic" && !(p.alpha > 0.0)) e.push_back("potential.alpha must be > 0");
  if (p.id == "doublewell" && !(p.a > 0.0)) e.push_back("potential.a must be > 0");
  if (p.truncate && !(*p.truncate > 0.0)) e.push_back("potential.truncate must be > 0");
  if (p.truncate && p.id == "doublewell") {
    e.push_back("potential.truncate needs a coercive potential; doublewell is not");
  }
  if (!std::isfinite(c.x0)) e.push_back("x0 must be finite");
  if (!std::isfinite(c.y0)) e.push_back("y0 must be finite");
  if (c.epsilons.empty()) e.push_back("epsilon must list at least one value");
  for (double eps : c.epsilons) {
    if (!(eps > 0.0 && eps < 1.0)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epsilon %g violates the constraint epsilon in (0,1)", eps);
      e.push_back(buf);
    }
  }
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "gamma = %g violates the constraint gamma in (0,1)", c.gamma);
    e.push_back(buf);
  }
  if (c.b.empty()) e.push_back("b grid must not be empty");
  for (double b : c.b) {
    if (!std::isfinite(b)) {
      e.push_back("b grid must be finite");
      break;
    }
  }
  if (c.engines.empty()) e.push_back("engines must name at least one engine");
  for (const auto& en : c.engines) {
    if (en != "analytic" && en != "fp" && en != "mc") {
      e.push_back("engine '" + en + "' is not one of analytic, fp, mc");
    }
  }
  if (c.uses("mc") && !c.mc.seed) e.push_back("mc.seed is mandatory when the mc engine is selected");
  if (!(c.fp.resolution > 0.0)) e.push_back("fp.resolution must be > 0");
  if (c.fp.n < 0 || c.fp.n == 1 || c.fp.n == 2) e.push_back("fp.n must be 0 or >= 3");
  if (!(c.fp.dt >= 0.0)) e.push_back("fp.dt must be >= 0");
  if (c.mc.paths == 0) e.push_back("mc.paths must be > 0");
  if (c.mc.tv_paths < 10000) e.push_back("mc.tv_paths must be >= 10000");
  if (!(c.mc.dt > 0.0)) e.push_back("mc.dt must be > 0");
  if (!(c.mc.t_end > 0.0)) e.push_back("mc.t_end must be > 0");
  if (c.mc.records < 1) e.push_back("mc.records must be >= 1");
  if (c.mc.bootstrap < 2) e.push_back("mc.bootstrap must be >= 2");
  if (!(c.doublewell.domain > 0.0)) e.push_back("doublewell.domain must be > 0");
  if (c.doublewell.escape_paths == 0) e.push_back("doublewell.escape_paths must be > 0");
  if (c.workers < 1) e.push_back("workers must be >= 1");
  if (c.out.empty()) e.push_back("out must not be empty");
  return e;
}

std::string canonical(const ExperimentConfig& c) {
  nlohmann::json j;
  j["potential"] = {{"id", c.potential.id},
                    {"alpha", c.potential.alpha},
                    {"a", c.potential.a},
                    {"tilt", c.potential.tilt},
                    {"truncate", c.potential.truncate ? nlohmann::json(*c.potential.truncate)
                                                      : nlohmann::json(nullptr)}};
  j["x0"] = c.x0;
  j["y0"] = c.y0;
  j["epsilon"] = c.epsilons;
  j["gamma"] = c.gamma;
  j["b"] = c.b;
  j["engines"] = c.engines;
  j["profile_mode"] = c.profile_mode == ProfileMode::linearized ? "linearized" : "first_order";
  j["fp"] = {{"resolution", c.fp.resolution},
             {"n", c.fp.n},
             {"dt", c.fp.dt},
             {"extrapolate", c.fp.extrapolate}};
  j["mc"] = {{"paths", c.mc.paths},
             {"tv_paths", c.mc.tv_paths},
             {"dt", c.mc.dt},
             {"seed", c.mc.seed ? nlohmann::json(*c.mc.seed) : nlohmann::json(nullptr)},
             {"t_end", c.mc.t_end},
             {"records", c.mc.records},
             {"bootstrap", c.mc.bootstrap}};
  j["doublewell"] = {{"domain", c.doublewell.domain},
                     {"well", c.doublewell.well},
                     {"center", to_string(c.doublewell.center)},
                     {"escape_paths", c.doublewell.escape_paths}};
  // workers and out do not change results and stay out of the hash.
  return j.dump();
}

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical(c))));
  return buf;
}

Potential build_potential(const PotentialSpec& s) {
  Potential p = s.id == "quadratic" ? quadratic(s.alpha)
                : s.id == "quartic" ? quartic()
                : s.id == "doublewell"
                    ? double_well(s.a, s.tilt)
                    : throw ValidationError("potential: unknown id '" + s.id + "'");
  if (s.truncate) return smooth_truncate(p, *s.truncate);
  return p;
}

}  // namespace cutoff

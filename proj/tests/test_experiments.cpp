#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cutoff/error.hpp"
#include "cutoff/experiments.hpp"

using namespace cutoff;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
potential: {id: quadratic, alpha: 1.0}
x0: 1.0
epsilon: [1.0e-2, 1.0e-4]
gamma: 0.5
b: [-1, 0, 1]
engines: [analytic]
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cutoff_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing and defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.potential.id == "quadratic");
  CHECK(c.epsilons.size() == 2);
  CHECK(c.b.size() == 3);
  CHECK(c.fp.resolution == 24.0);
  const auto grid = parse_config("potential: {id: quartic}\nepsilon: [0.01]\nb: {from: -2, to: 2, count: 5}\n");
  REQUIRE(grid.b.size() == 5);
  CHECK(grid.b[1] == doctest::Approx(-1.0));
}

TEST_CASE("invalid gamma is rejected with the (0,1) constraint") {
  try {
    parse_config("potential: {id: quadratic}\nepsilon: [0.01]\nb: [0]\ngamma: 1.5\n");
    FAIL("no error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("gamma in (0,1)") != std::string::npos);
  }
}

TEST_CASE("all config errors are reported together") {
  try {
    parse_config("potential: {id: cubic}\nepsilon: [2]\nengines: [mc, gpu]\nextra: 1\n");
    FAIL("no error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const char* needle : {"extra", "potential.id", "epsilon 2", "gpu", "mc.seed", "b grid"}) {
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, needle);
    }
  }
  CHECK_THROWS_AS(parse_config("[unclosed"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ValidationError);
}

TEST_CASE("seed override and hashing") {
  const std::string text = std::string(kMinimal) + "mc: {paths: 10}\n";
  const auto a = parse_config(text);
  const auto b = parse_config(text, 7);
  CHECK(config_hash(a) == config_hash(parse_config(text)));
  CHECK(config_hash(a) != config_hash(b));
  auto c = a;
  c.workers = 4;
  c.out = "elsewhere";
  CHECK(config_hash(a) == config_hash(c));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("number formatting keeps 17 significant digits") {
  CHECK(format_number(0.1) == "1.0000000000000001e-01");
  CHECK(std::stod(format_number(M_PI)) == M_PI);
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
  CsvTable t;
  t.columns = {"a", "b"};
  t.add({"1", "2"});
  CHECK_THROWS_AS(t.add({"1"}), EngineError);
  CHECK(t.render("abc", "x") == "# config_hash=abc command=x\na,b\n1,2\n");
}

TEST_CASE("minimal analytic run is fast and reproduces G(0)") {
  const auto dir = scratch("minimal");
  const auto start = std::chrono::steady_clock::now();
  const auto m = run(parse_config(kMinimal), Command::profile, {dir.string(), false});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 1.0);
  CHECK(m.status == 0);
  const auto csv = slurp(dir / "profile.csv");
  CHECK(csv.rfind("# config_hash=" + m.config_hash, 0) == 0);
  CHECK(csv.find("epsilon,b,t,distance,profile,flagged") != std::string::npos);
  CHECK(csv.find("3.829249225480") != std::string::npos);
  CHECK(fs::exists(dir / "profile.manifest.json"));
  // Second run refuses to overwrite; --force allows it.
  CHECK_THROWS_AS(run(parse_config(kMinimal), Command::profile, {dir.string(), false}), ValidationError);
  CHECK_NOTHROW(run(parse_config(kMinimal), Command::profile, {dir.string(), true}));
  fs::remove_all(dir);
}

TEST_CASE("mc output is byte-identical on rerun") {
  const std::string text = R"(
potential: {id: quartic}
x0: 1.0
epsilon: [1.0e-2]
b: [0, 1]
engines: [mc]
mc: {seed: 17, paths: 200, tv_paths: 10000, t_end: 1.0, records: 5, bootstrap: 20}
)";
  const auto d1 = scratch("mc1"), d2 = scratch("mc2");
  run(parse_config(text), Command::mc, {d1.string(), false});
  run(parse_config(text), Command::mc, {d2.string(), false});
  for (const char* f : {"mc_bounds.csv", "mc_distance.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
  const auto d3 = scratch("mc3");
  run(parse_config(text, 18), Command::mc, {d3.string(), false});
  CHECK(slurp(d1 / "mc_distance.csv") != slurp(d3 / "mc_distance.csv"));
  for (const auto& d : {d1, d2, d3}) fs::remove_all(d);
}

TEST_CASE("constants command") {
  const auto r = execute(parse_config("potential: {id: quartic}\nx0: 1.0\nepsilon: [0.01]\nb: [0]\n"),
                         Command::constants);
  const auto& t = r.tables.at("constants.csv");
  CHECK(std::stod(t.rows[0][3]) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-8));

  // Right well of the double well: V'(1+u) = u(1+u)(2+u), so
  // H(u) = 1/(2+u) - 2/(1+u) and c~ = u0 (2+u0) / (2 (1+u0)^2).
  const auto dw = execute(parse_config("potential: {id: doublewell, a: 1.0}\nx0: 1.3\n"
                                       "epsilon: [0.01]\nb: [0]\n"),
                          Command::constants);
  CHECK(dw.manifest.diagnostics["well"].get<double>() == doctest::Approx(1.0));
  const double u0 = 0.3;
  const double closed = u0 * (2 + u0) / (2 * (1 + u0) * (1 + u0));
  CHECK(std::stod(dw.tables.at("constants.csv").rows[0][3]) == doctest::Approx(closed).epsilon(1e-8));
}

TEST_CASE("engines agree on the quadratic") {
  const auto c = parse_config(R"(
potential: {id: quadratic, alpha: 1.0}
x0: 1.0
epsilon: [2.0e-2]
b: [-1, 0, 1]
engines: [analytic, fp, mc]
mc: {seed: 5, tv_paths: 20000}
)");
  const auto report = compare_engines(c);
  CHECK(report.pass());
  REQUIRE(report.pairs.size() == 2);
  CHECK(report.pairs[0].max_deviation < 5e-3);
}

TEST_CASE("a deliberately coarse fp grid fails with the self-convergence diagnostic") {
  const auto c = parse_config(R"(
potential: {id: quartic}
x0: 1.0
epsilon: [1.0e-2]
b: [-1, 0, 1]
engines: [analytic, fp]
fp: {resolution: 3, extrapolate: false}
)");
  const auto report = compare_engines(c);
  REQUIRE(report.pairs.size() == 1);
  CHECK_FALSE(report.pairs[0].pass);
  CHECK(std::isfinite(report.pairs[0].self_convergence));
  CHECK(report.pairs[0].self_convergence > 1e-3);
  CHECK_THROWS_AS(compare_engines(parse_config(kMinimal)), ValidationError);
}

TEST_CASE("doublewell command writes the local table") {
  const auto r = execute(parse_config(R"(
potential: {id: doublewell, a: 1.0}
x0: 1.3
epsilon: [2.0e-2]
b: [-1, 0, 1]
doublewell: {well: 1.0, escape_paths: 100}
)"),
                         Command::doublewell);
  const auto& t = r.tables.at("doublewell.csv");
  CHECK(t.rows.size() == 3);
  CHECK(t.rows[0].back() == "at_xstar");
  CHECK(r.manifest.diagnostics["regime_separation"].size() == 1);
}

TEST_CASE("command names") {
  for (const char* n : {"constants", "profile", "fp", "mc", "doublewell", "compare"}) {
    CHECK(to_string(parse_command(n)) == n);
  }
  CHECK_THROWS_AS(parse_command("plot"), ValidationError);
}

#include <doctest.h>

#include <cmath>

#include "cutoff/error.hpp"
#include "cutoff/fokker_planck.hpp"
#include "oracles.hpp"

using namespace cutoff;

TEST_CASE("quadratic evolution matches the OU marginal") {
  const double eps = 0.05;
  const std::vector<double> times{0.5, 1.0, 3.0};
  const auto run = evolve(quadratic(1.0), eps, 1.0, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto exact = make_gaussian(oracle::ou_mean(1.0, 1.0, times[i]),
                                     oracle::ou_variance(1.0, eps, times[i]));
    CHECK(tv_grid(run.snapshots[i], exact) < 5e-4);
    CHECK(run.snapshots[i].mass() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(run.snapshots[i].mean() == doctest::Approx(exact.mean).epsilon(1e-4));
  }
  CHECK(run.diagnostics.extrapolated);
  CHECK(run.diagnostics.min_density >= -1e-12);
}

TEST_CASE("the stationary density does not move") {
  const double eps = 0.05;
  const auto mu = stationary_density(quartic(), eps, 1.2, 801);
  const auto run = evolve_from(quartic(), eps, mu.density, {1.0});
  CHECK(tv_grid(run.snapshots[0], mu.density) < 1e-8);
}

TEST_CASE("stationary density against a Simpson normalizer") {
  const double eps = 0.1;
  const auto mu = stationary_density(quartic(), eps, 2.0, 4001);
  const auto v = quartic();
  const double z = oracle::simpson([&](double x) { return std::exp(-2 * v.value(x) / eps); }, -2, 2, 20000);
  CHECK(mu.log_normalizer == doctest::Approx(std::log(z)).epsilon(1e-8));
  CHECK(mu.density.mass() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(stationary_density(quartic(), eps, 0.3, 101), ValidationError);
}

TEST_CASE("tv_grid basics") {
  const auto g = make_grid(-5, 5, 2001);
  DensityGrid a{g, Eigen::ArrayXd::Zero(g.n), 0.0};
  const auto x = g.nodes();
  for (Eigen::Index i = 0; i < g.n; ++i) a.p[i] = oracle::normal_pdf(x[i], 0, 1);
  CHECK(tv_grid(a, a) == 0.0);
  CHECK(tv_grid(a, make_gaussian(0.0, 1.0)) < 1e-6);
  CHECK(tv_grid(a, make_gaussian(1.0, 1.0)) == doctest::Approx(tv_unit(1.0)).epsilon(1e-5));
  DensityGrid other{make_grid(-5, 5, 2000), Eigen::ArrayXd::Zero(2000), 0.0};
  CHECK_THROWS_AS(tv_grid(a, other), ValidationError);
}

TEST_CASE("invariant-measure gap") {
  CHECK(invariantes_gap(quadratic(1.0), 0.1) < 1e-12);
  const double g1 = invariantes_gap(quartic(), 0.5);
  const double g2 = invariantes_gap(quartic(), 0.1);
  const double g3 = invariantes_gap(quartic(), 0.02);
  CHECK(g1 > g2);
  CHECK(g2 > g3);
}

TEST_CASE("halving h and dt barely changes the OU distance") {
  const double eps = 0.05;
  const double change = self_convergence(
      quadratic(1.0), eps, 1.0, {0.5, 2.0}, FpControls{}, [&](const DensityGrid& d) {
        return tv_grid(d, make_gaussian(oracle::ou_mean(1.0, 1.0, d.t),
                                        oracle::ou_variance(1.0, eps, d.t)));
      });
  CHECK(change < 1e-4);
}

TEST_CASE("evolve validation") {
  FpControls c;
  c.lo = -1;
  c.hi = 1;
  CHECK_THROWS_AS(evolve(quadratic(1.0), 0.05, 2.0, {1.0}, c), ValidationError);
  CHECK_THROWS_AS(evolve(quadratic(1.0), 0.0, 0.5, {1.0}), ValidationError);
  CHECK_THROWS_AS(evolve(quadratic(1.0), 0.05, 0.5, {1e-9}), ValidationError);
}

TEST_CASE("mass leaving a too-small domain is an engine error") {
  FpControls c;
  c.lo = -0.6;
  c.hi = 1.2;
  c.n = 401;
  CHECK_THROWS_AS(evolve(quadratic(1.0), 0.2, 1.0, {3.0}, c), EngineError);
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cutoff/error.hpp"
#include "cutoff/gaussian.hpp"
#include "oracles.hpp"

using namespace cutoff;

TEST_CASE("tv_unit matches the half-L1 quadrature") {
  for (double mu : {0.0, 0.1, 0.5, 1.0, 2.0, 3.7, 8.0}) {
    CHECK(tv_unit(mu) == doctest::Approx(oracle::tv_normal_quadrature(mu, 1, 0, 1)).epsilon(1e-10));
  }
  CHECK(tv_unit(2.0) == doctest::Approx(0.6826895).epsilon(1e-7));
  CHECK(tv_unit(-1.3) == tv_unit(1.3));
}

TEST_CASE("tv_unit stays below |mu|/sqrt(2 pi) and is monotone") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  double prev = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double mu = u(gen);
    CHECK(tv_unit(mu) <= std::abs(mu) / std::sqrt(2.0 * std::numbers::pi) + 1e-15);
  }
  for (double mu = 0.0; mu < 10.0; mu += 0.01) {
    const double v = tv_unit(mu);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("tv_normal agrees with quadrature for unequal variances") {
  struct Case {
    double m1, v1, m2, v2;
  };
  for (const auto& c : {Case{0, 1, 0, 2}, Case{0.3, 0.5, -1, 2}, Case{5, 1e-2, 5.1, 1e-2},
                        Case{0, 1, 0, 1 + 1e-9}, Case{1, 4, 0, 0.25}}) {
    const double expected = oracle::tv_normal_quadrature(c.m1, c.v1, c.m2, c.v2);
    CHECK(tv_normal({c.m1, c.v1}, {c.m2, c.v2}) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("tv_normal is invariant under affine maps and symmetric") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0), v(0.1, 4.0);
  for (int i = 0; i < 200; ++i) {
    const GaussianLaw a{u(gen), v(gen)}, b{u(gen), v(gen)};
    const double scale = v(gen), shift = u(gen);
    const double base = tv_normal(a, b);
    const GaussianLaw as{scale * a.mean + shift, scale * scale * a.variance};
    const GaussianLaw bs{scale * b.mean + shift, scale * scale * b.variance};
    CHECK(tv_normal(as, bs) == doctest::Approx(base).epsilon(1e-12));
    const GaussianLaw ar{-a.mean, a.variance}, br{-b.mean, b.variance};
    CHECK(tv_normal(ar, br) == doctest::Approx(base).epsilon(1e-12));
    CHECK(tv_normal(b, a) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("tv_normal obeys the Pinsker bound") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0), v(0.2, 3.0);
  for (int i = 0; i < 500; ++i) {
    const GaussianLaw a{u(gen), v(gen)}, b{u(gen), v(gen)};
    CHECK(tv_normal(a, b) <= std::sqrt(0.5 * kl_normal(a, b)) + 1e-12);
  }
}

TEST_CASE("make_gaussian rejects degenerate variances") {
  CHECK_THROWS_AS(make_gaussian(0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(make_gaussian(0.0, -1.0), ValidationError);
  CHECK_THROWS_AS(make_gaussian(0.0, std::nan("")), ValidationError);
}

TEST_CASE("profile has the right limits and value at zero") {
  CHECK(profile(0.0, 1.0) == doctest::Approx(0.3829249225480262).epsilon(1e-12));
  CHECK(profile(-40.0, 1.0) == doctest::Approx(1.0));
  CHECK(profile(40.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(profile(-2000.0, 1.0) == 1.0);
  // G(b; c) = G(b - ln c; 1)
  CHECK(profile(0.7, 0.25) == doctest::Approx(profile(0.7 - std::log(0.25), 1.0)).epsilon(1e-14));
  const auto curve = profile_curve(1.0, Eigen::ArrayXd::LinSpaced(81, -4, 4));
  // Strictly decreasing until it saturates at 1 in double precision.
  for (Eigen::Index i = 1; i < curve.g.size(); ++i) {
    CHECK(curve.g[i] <= curve.g[i - 1]);
    if (curve.g[i - 1] < 1.0) CHECK(curve.g[i] < curve.g[i - 1]);
  }
}

TEST_CASE("schedule formulas") {
  const auto g = schedule(1.0, 1e-4, 0.5, ScheduleMode::general);
  CHECK(g.t_eps == doctest::Approx((std::log(1e4) + std::log(2.0)) / 2.0).epsilon(1e-14));
  CHECK(g.t_eps == doctest::Approx(4.951744).epsilon(1e-6));
  CHECK(g.window == doctest::Approx(1.0 + 1e-2));

  const auto l = schedule(2.0, 1e-3, 0.5, ScheduleMode::local);
  CHECK(l.t_eps == doctest::Approx(std::log(1000.0) / 4.0).epsilon(1e-14));
  CHECK(l.t_eps == doctest::Approx(1.7269).epsilon(1e-4));
  CHECK(l.window == doctest::Approx(0.5 + std::sqrt(1e-3)));

  const auto lin = schedule(1.5, 1e-3, 0.5, ScheduleMode::linearized, 2.0);
  CHECK(lin.t_eps == doctest::Approx((std::log(1e3) + std::log(2 * 1.5 * 4.0)) / 3.0));
  CHECK(lin.window == doctest::Approx(1.0 / 1.5));
  CHECK(lin.shifted_time(1.0) == doctest::Approx(lin.t_eps + 1.0 / 1.5 + std::sqrt(1e-3)));
  CHECK(g.shifted_time(-1.5) == doctest::Approx(g.time(-1.5)));
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(schedule(1.0, 1e-3, 1.5), ValidationError);
  CHECK_THROWS_AS(schedule(1.0, 1e-3, 0.0), ValidationError);
  CHECK_THROWS_AS(schedule(-1.0, 1e-3, 0.5), ValidationError);
  CHECK_THROWS_AS(schedule(1.0, 0.0, 0.5), ValidationError);
  CHECK_THROWS_AS(schedule(1.0, 1e-3, 0.5, ScheduleMode::linearized, 0.0), ValidationError);
  const auto s = schedule(1.0, 0.5, 0.5);
  CHECK_THROWS_AS(require_positive_times(s, Eigen::ArrayXd::LinSpaced(3, -4, 4), false),
                  ValidationError);
  CHECK_NOTHROW(require_positive_times(s, Eigen::ArrayXd::LinSpaced(3, 0, 4), false));
}

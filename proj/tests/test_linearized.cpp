#include <doctest.h>

#include <cmath>

#include "cutoff/error.hpp"
#include "cutoff/linearized.hpp"
#include "oracles.hpp"

using namespace cutoff;

TEST_CASE("linearized law of the quadratic is the OU law") {
  const double alpha = 1.3, eps = 1e-3, y0 = 0.8;
  const auto tr = integrate_semiflow(quadratic(alpha), 1.0, 6.0, 1e-11);
  for (double t : {0.1, 1.0, 5.0}) {
    const auto law = law_at(tr, eps, y0, t);
    CHECK(law.mean == doctest::Approx(y0 * std::exp(-alpha * t)).epsilon(1e-9));
    CHECK(law.variance == doctest::Approx(oracle::ou_variance(alpha, eps, t)).epsilon(1e-9));
    const auto fo = first_order_law(tr, eps, t);
    CHECK(fo.mean == doctest::Approx(std::exp(-alpha * t)).epsilon(1e-9));
    CHECK(first_order_distance(tr, eps, t) ==
          doctest::Approx(oracle::tv_normal_quadrature(oracle::ou_mean(alpha, 1.0, t),
                                                       oracle::ou_variance(alpha, eps, t), 0.0,
                                                       eps / (2 * alpha)))
              .epsilon(1e-7));
  }
  CHECK_THROWS_AS(law_at(tr, eps, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(linearized_distance(tr, eps, 1.0, 0.0), ValidationError);
}

TEST_CASE("linearized distance depends on y0 only through the schedule") {
  const auto tr = integrate_semiflow(quadratic(1.0), 1.0, 20.0, 1e-11);
  for (double y0 : {0.5, 2.0}) {
    const auto s = schedule(1.0, 1e-6, 0.5, ScheduleMode::linearized, y0);
    CHECK(linearized_distance(tr, 1e-6, y0, s.time(0.0)) ==
          doctest::Approx(profile(0.0, 1.0)).epsilon(1e-5));
  }
}

TEST_CASE("quadratic linearized profile is within 1e-3 at eps = 1e-6") {
  const auto table = profile_convergence(quadratic(1.0), 1.0, 1.0, 0.5, {1e-6},
                                         Eigen::ArrayXd::LinSpaced(25, -6, 6));
  CHECK(table.constant == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(table.sup_error[0] < 1e-3);
}

TEST_CASE("quartic profile error shrinks with eps") {
  const Eigen::ArrayXd b = Eigen::ArrayXd::LinSpaced(13, -3, 3);
  for (auto mode : {ProfileMode::linearized, ProfileMode::first_order}) {
    const auto table = profile_convergence(quartic(), 1.0, 1.0, 0.5, {1e-2, 1e-3, 1e-4}, b, mode, 2);
    CHECK(table.sup_error[1] < table.sup_error[0]);
    CHECK(table.sup_error[2] < table.sup_error[1]);
  }
}

TEST_CASE("rows with non-positive times are flagged, not computed") {
  const auto table = profile_convergence(quadratic(1.0), 1.0, 1.0, 0.5, {0.5},
                                         Eigen::ArrayXd::LinSpaced(5, -4, 4));
  bool any = false;
  for (const auto& r : table.rows) {
    if (r.t <= 0) {
      CHECK(r.flagged);
      CHECK(std::isnan(r.distance));
      any = true;
    }
  }
  CHECK(any);
}

TEST_CASE("worker count does not change the table") {
  const Eigen::ArrayXd b = Eigen::ArrayXd::LinSpaced(7, -2, 2);
  const auto a = profile_convergence(quartic(), 1.0, 1.0, 0.5, {1e-2, 1e-3}, b,
                                     ProfileMode::first_order, 1);
  const auto c = profile_convergence(quartic(), 1.0, 1.0, 0.5, {1e-2, 1e-3}, b,
                                     ProfileMode::first_order, 3);
  REQUIRE(a.rows.size() == c.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].distance == c.rows[i].distance);
}

#include "cutoff/potential.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cutoff/error.hpp"
#include "cutoff/quadrature.hpp"

namespace cutoff {

Potential::Potential(std::string id, std::array<Evaluator, 4> derivatives,
                     std::map<std::string, double> parameters,
                     std::optional<PotentialTraits> traits)
    : id_(std::move(id)),
      derivatives_(std::make_shared<const std::array<Evaluator, 4>>(std::move(derivatives))),
      parameters_(std::move(parameters)),
      traits_(traits) {
  for (const auto& f : *derivatives_) {
    if (!f) throw ValidationError("potential '" + id_ + "' is missing a derivative evaluator");
  }
}

double Potential::eval(double x, int order) const {
  if (order < 0 || order > 3) {
    throw ValidationError("derivative order " + std::to_string(order) + " is not in 0..3");
  }
  const double v = (*derivatives_)[static_cast<std::size_t>(order)](x);
  if (!std::isfinite(v)) {
    throw NonFiniteError("potential '" + id_ + "': derivative of order " + std::to_string(order) +
                         " is not finite at x = " + std::to_string(x));
  }
  return v;
}

Potential quadratic(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("quadratic potential needs alpha > 0");
  }
  PotentialTraits traits{true, true, alpha, alpha, 0.0};
  return Potential("quadratic",
                   {[alpha](double x) { return 0.5 * alpha * x * x; },
                    [alpha](double x) { return alpha * x; }, [alpha](double) { return alpha; },
                    [](double) { return 0.0; }},
                   {{"alpha", alpha}}, traits);
}

Potential quartic() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  PotentialTraits traits{true, true, 1.0, inf, inf};
  return Potential("quartic",
                   {[](double x) {
                      const double x2 = x * x;
                      return 0.5 * x2 + 0.25 * x2 * x2;
                    },
                    [](double x) { return x + x * x * x; },
                    [](double x) { return 1.0 + 3.0 * x * x; }, [](double x) { return 6.0 * x; }},
                   {}, traits);
}

Potential double_well(double a, double tilt) {
  if (!(a > 0.0)) throw ValidationError("double-well potential needs a > 0");
  const double a2 = a * a;
  PotentialTraits traits;  // neither regular nor coercive
  return Potential("doublewell",
                   {[a2, tilt](double x) {
                      const double s = x * x - a2;
                      return 0.25 * s * s + tilt * x;
                    },
                    [a2, tilt](double x) { return x * (x * x - a2) + tilt; },
                    [a2](double x) { return 3.0 * x * x - a2; }, [](double x) { return 6.0 * x; }},
                   {{"a", a}, {"tilt", tilt}}, traits);
}

Potential user_defined(std::string id, Evaluator v, Evaluator dv, Evaluator d2v, Evaluator d3v) {
  return Potential(std::move(id), {std::move(v), std::move(dv), std::move(d2v), std::move(d3v)});
}

Potential shifted(const Potential& p, double center) {
  const double base = p.value(center);
  auto params = p.parameters();
  params["center"] = center;
  return Potential(p.id() + "@shifted",
                   {[p, center, base](double u) { return p.value(center + u) - base; },
                    [p, center](double u) { return p.d1(center + u); },
                    [p, center](double u) { return p.d2(center + u); },
                    [p, center](double u) { return p.d3(center + u); }},
                   params);
}

Classification classify(const Potential& p, double a, double b, int n_probes) {
  if (!(a < b)) throw ValidationError("classify: probe interval needs a < b");
  if (n_probes < 3) throw ValidationError("classify: need at least 3 probes");

  Classification c;
  c.delta = std::numeric_limits<double>::infinity();
  c.kappa2 = 0.0;
  c.kappa3 = 0.0;
  bool sign_ok = true;
  double bad_x = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    const double x = a + (b - a) * i / (n_probes - 1);
    const double v2 = p.d2(x);
    c.delta = std::min(c.delta, v2);
    c.kappa2 = std::max(c.kappa2, std::abs(v2));
    c.kappa3 = std::max(c.kappa3, std::abs(p.d3(x)));
    if (x != 0.0 && sign_ok) {
      const double v1 = p.d1(x);
      if (!(v1 * x > 0.0)) {
        sign_ok = false;
        bad_x = x;
      }
    }
  }

  if (const auto& t = p.traits()) {
    c.basis = ClassBasis::exact;
    c.regular = t->regular;
    c.coercive = t->regular && t->coercive;
    c.smooth_coercive = c.coercive && std::isfinite(t->kappa2) && std::isfinite(t->kappa3);
    if (!c.regular) {
      c.reason = "not regular (declared)";
    } else if (!c.coercive) {
      c.reason = "regular but not coercive (declared)";
    } else if (!c.smooth_coercive) {
      c.reason = "coercive but V'' or V''' unbounded on the real line (declared)";
    }
    return c;
  }

  c.basis = ClassBasis::probe;
  const double v0 = p.value(0.0);
  const double v1 = p.d1(0.0);
  const double v2 = p.d2(0.0);
  if (std::abs(v0) > 1e-12) {
    c.reason = "not regular: V(0) != 0";
  } else if (std::abs(v1) > 1e-12) {
    c.reason = "not regular: V'(0) != 0";
  } else if (!(v2 > 0.0)) {
    c.reason = "not regular: V''(0) <= 0";
  } else if (!sign_ok) {
    c.reason = "not regular: V' vanishes or has the wrong sign at x = " + std::to_string(bad_x);
  } else {
    c.regular = true;
    if (c.delta > 0.0) {
      c.coercive = true;
      // Finite on probes is all a probe can show.
      c.smooth_coercive = true;
    } else {
      c.reason = "regular but min V'' <= 0 on the probe set";
    }
  }
  return c;
}

double smooth_step(double u) {
  auto bump = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  const double left = bump(u - 0.5);
  const double right = bump(1.0 - u);
  return left / (left + right);
}

double smooth_step_derivative(double u) {
  if (u <= 0.5 || u >= 1.0) return 0.0;
  const double s1 = u - 0.5;
  const double s2 = 1.0 - u;
  const double e1 = std::exp(-1.0 / s1);
  const double e2 = std::exp(-1.0 / s2);
  const double de1 = e1 / (s1 * s1);
  const double de2 = -e2 / (s2 * s2);  // d/du of e(1 - u)
  const double den = e1 + e2;
  return (de1 * e2 - e1 * de2) / (den * den);
}

namespace {

// Cumulative integrals of the blended second derivative on the transition
// band sqrt(2) M <= |x| <= 2M (one table per side). Built once; read-only after.
struct TruncationTable {
  Potential base;
  double M;
  double delta;
  double inner;  // sqrt(2) M
  double outer;  // 2M
  // nodes[k] = sign * (inner + k * step); s/v are S_M and V_M at the nodes
  std::array<std::vector<double>, 2> nodes, s, v;

  double blend(double x) const { return smooth_step(x * x / (4.0 * M * M)); }

  double r(double x) const {
    const double g = blend(x);
    return g * delta + (1.0 - g) * base.d2(x);
  }

  double dr(double x) const {
    const double g = blend(x);
    const double dg = smooth_step_derivative(x * x / (4.0 * M * M)) * x / (2.0 * M * M);
    return dg * (delta - base.d2(x)) + (1.0 - g) * base.d3(x);
  }

  // S and V at x, continuing from node k of side `side`.
  std::pair<double, double> from_node(int side, std::size_t k, double x) const {
    const double xk = nodes[side][k];
    if (x == xk) return {s[side][k], v[side][k]};
    const double ds = integrate([this](double y) { return r(y); }, xk, x, 1e-12).value;
    const double dv =
        integrate([this, x](double y) { return (x - y) * r(y); }, xk, x, 1e-12).value;
    return {s[side][k] + ds, v[side][k] + s[side][k] * (x - xk) + dv};
  }

  std::pair<double, double> sv(double x) const {
    const double ax = std::abs(x);
    if (ax <= inner) return {base.d1(x), base.value(x)};
    const int side = x > 0.0 ? 0 : 1;
    const auto& nd = nodes[side];
    if (ax >= outer) {
      const double xe = nd.back();
      const double se = s[side].back();
      const double ve = v[side].back();
      const double d = x - xe;
      return {se + delta * d, ve + se * d + 0.5 * delta * d * d};
    }
    const double step = (outer - inner) / static_cast<double>(nd.size() - 1);
    auto k = static_cast<std::size_t>((ax - inner) / step);
    k = std::min(k, nd.size() - 1);
    return from_node(side, k, x);
  }
};

}  // namespace

Potential smooth_truncate(const Potential& p, double M, std::optional<double> delta) {
  if (!(M >= 1.0) || !std::isfinite(M)) {
    throw ValidationError("smooth_truncate: M must be a finite number >= 1");
  }
  double d = 0.0;
  if (delta) {
    d = *delta;
  } else if (p.traits() && p.traits()->regular && p.traits()->coercive) {
    d = p.traits()->delta;
  } else {
    throw ValidationError("smooth_truncate: potential '" + p.id() +
                          "' is not declared coercive; pass its coercivity constant");
  }
  if (!(d > 0.0)) throw ValidationError("smooth_truncate: coercivity constant must be > 0");

  auto table = std::make_shared<TruncationTable>(TruncationTable{p, M, d, std::sqrt(2.0) * M,
                                                                 2.0 * M, {}, {}, {}});
  constexpr std::size_t intervals = 64;
  const double step = (table->outer - table->inner) / static_cast<double>(intervals);
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    auto& nd = table->nodes[side];
    auto& s = table->s[side];
    auto& v = table->v[side];
    nd.resize(intervals + 1);
    s.resize(intervals + 1);
    v.resize(intervals + 1);
    nd[0] = sign * table->inner;
    s[0] = p.d1(nd[0]);
    v[0] = p.value(nd[0]);
    for (std::size_t k = 1; k <= intervals; ++k) {
      nd[k] = sign * (table->inner + static_cast<double>(k) * step);
      const double x0 = nd[k - 1];
      const double x1 = nd[k];
      const auto& tb = *table;
      s[k] = s[k - 1] + integrate([&tb](double y) { return tb.r(y); }, x0, x1, 1e-12).value;
      v[k] = v[k - 1] + s[k - 1] * (x1 - x0) +
             integrate([&tb, x1](double y) { return (x1 - y) * tb.r(y); }, x0, x1, 1e-12).value;
    }
  }

  // kappa2/kappa3 are constant beyond 2M, so probing [-2M, 2M] densely covers R.
  double k2 = 0.0;
  double k3 = 0.0;
  constexpr int probes = 40001;
  for (int i = 0; i < probes; ++i) {
    const double x = -table->outer + 2.0 * table->outer * i / (probes - 1);
    k2 = std::max(k2, std::abs(table->r(x)));
    k3 = std::max(k3, std::abs(table->dr(x)));
  }
  PotentialTraits traits{true, true, d, k2, k3};

  std::shared_ptr<const TruncationTable> t = table;
  auto params = p.parameters();
  params["M"] = M;
  params["delta"] = d;
  return Potential(p.id() + "@truncated",
                   {[t](double x) { return t->sv(x).second; },
                    [t](double x) { return t->sv(x).first; }, [t](double x) { return t->r(x); },
                    [t](double x) { return t->dr(x); }},
                   params, traits);
}

}  // namespace cutoff

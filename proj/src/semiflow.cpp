#include "cutoff/semiflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cutoff/error.hpp"
#include "cutoff/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

namespace cutoff {

namespace {

// Dormand-Prince 5(4) tableau. The flow is autonomous, so the nodes c_i are not needed.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// Right-hand side in u = log|psi|. rate = V'(psi)/psi > 0 for a regular potential.
struct LogFlow {
  const Potential& p;
  double sign;
  double log_rate0;
  double u0;

  double rate(double u) const {
    const double psi = sign * std::exp(u);
    double r;
    if (std::abs(psi) < 1e-280) {
      r = p.d2(0.0);
    } else {
      r = p.d1(psi) / psi;
    }
    if (!(r > 0.0)) {
      throw EngineError("semiflow: V'(x)/x <= 0 at x = " + std::to_string(psi) +
                        "; the potential is not regular on the flow line");
    }
    return r;
  }

  // du/dt and dI/dt at u.
  void rhs(double u, double& du, double& di) const {
    const double r = rate(u);
    du = -r;
    const double log_phi = std::log(r) - log_rate0 + u - u0;
    di = std::exp(-2.0 * log_phi);
    if (!std::isfinite(di)) throw NonFiniteError("semiflow: Phi^-2 overflowed; horizon too long");
  }

  double log_phi(double u) const { return std::log(rate(u)) - log_rate0 + u - u0; }
};

void push_sample(std::vector<double>* cols[], const Potential& p, const LogFlow& f, double t,
                 double u, double integral) {
  const double psi = f.sign * std::exp(u);
  const double lp = f.log_phi(u);
  const double phi = std::exp(lp);
  const double values[] = {t,  psi, phi, integral, u, lp, -f.rate(u), -p.d2(psi),
                           std::exp(-2.0 * lp)};
  for (int k = 0; k < 9; ++k) cols[k]->push_back(values[k]);
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

SemiflowTrajectory integrate_semiflow(const Potential& p, double x0, double t_end, double tol,
                                      const std::vector<double>& output_times) {
  if (x0 == 0.0 || !std::isfinite(x0)) {
    throw ValidationError("semiflow: x0 must be finite and nonzero");
  }
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) {
    throw ValidationError("semiflow: t_end must be finite and >= 0");
  }
  if (!(tol > 0.0) || tol >= 1e-2) throw ValidationError("semiflow: tol must lie in (0, 1e-2)");

  std::vector<double> stops;
  for (double s : output_times) {
    if (!std::isfinite(s)) throw ValidationError("semiflow: non-finite output time");
    if (s > 0.0 && s < t_end) stops.push_back(s);
  }
  stops.push_back(t_end);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  const double sign = x0 > 0.0 ? 1.0 : -1.0;
  const double u0 = std::log(std::abs(x0));
  LogFlow f{p, sign, 0.0, u0};
  f.log_rate0 = std::log(f.rate(u0));

  SemiflowTrajectory tr;
  tr.x0 = x0;
  tr.curvature = p.d2(0.0);
  std::vector<double> ct, cpsi, cphi, ci, cu, clp, cdu, cdlp, cdi;
  std::vector<double>* cols[] = {&ct, &cpsi, &cphi, &ci, &cu, &clp, &cdu, &cdlp, &cdi};

  double t = 0.0;
  double u = u0;
  double integral = 0.0;
  double kahan = 0.0;
  push_sample(cols, p, f, t, u, integral);

  double ku1, ki1;
  f.rhs(u, ku1, ki1);
  double h = std::min(0.1 / std::abs(ku1), std::max(t_end, 1e-3)) * std::pow(tol, 0.2);
  // Stored samples feed cubic Hermite interpolation, so steps stay a small
  // fraction of the relaxation time even where the local error vanishes.
  const double h_max = 0.005 / std::max(std::abs(ku1), std::abs(tr.curvature));
  std::size_t next = 0;
  constexpr std::size_t max_steps = 10'000'000;
  std::size_t steps = 0;

  while (next < stops.size()) {
    if (t_end == 0.0) break;
    if (++steps > max_steps) throw EngineError("semiflow: step budget exhausted");
    const double stop = stops[next];
    bool hit = false;
    if (t + h >= stop - 1e-13 * std::max(1.0, stop)) {
      h = stop - t;
      hit = true;
    }
    if (h < 1e-14 * std::max(1.0, t)) {
      throw EngineError("semiflow: step size underflow at t = " + std::to_string(t));
    }

    double ku2, ki2, ku3, ki3, ku4, ki4, ku5, ki5, ku6, ki6, ku7, ki7;
    f.rhs(u + h * a21 * ku1, ku2, ki2);
    f.rhs(u + h * (a31 * ku1 + a32 * ku2), ku3, ki3);
    f.rhs(u + h * (a41 * ku1 + a42 * ku2 + a43 * ku3), ku4, ki4);
    f.rhs(u + h * (a51 * ku1 + a52 * ku2 + a53 * ku3 + a54 * ku4), ku5, ki5);
    f.rhs(u + h * (a61 * ku1 + a62 * ku2 + a63 * ku3 + a64 * ku4 + a65 * ku5), ku6, ki6);
    const double du = h * (b1 * ku1 + b3 * ku3 + b4 * ku4 + b5 * ku5 + b6 * ku6);
    const double di = h * (b1 * ki1 + b3 * ki3 + b4 * ki4 + b5 * ki5 + b6 * ki6);
    const double u_new = u + du;
    f.rhs(u_new, ku7, ki7);

    const double err_u =
        h * (e1 * ku1 + e3 * ku3 + e4 * ku4 + e5 * ku5 + e6 * ku6 + e7 * ku7);
    const double err_i =
        h * (e1 * ki1 + e3 * ki3 + e4 * ki4 + e5 * ki5 + e6 * ki6 + e7 * ki7);
    const double i_new_est = integral + di;
    const double sc_i = tol + tol * std::max(std::abs(integral), std::abs(i_new_est));
    const double err = std::max(std::abs(err_u) / tol, std::abs(err_i) / sc_i);

    if (!std::isfinite(err)) throw NonFiniteError("semiflow: non-finite error estimate");

    if (err <= 1.0) {
      t = hit ? stop : t + h;
      u = u_new;
      // Kahan-compensated accumulation of I.
      const double y = di - kahan;
      const double s = integral + y;
      kahan = (s - integral) - y;
      integral = s;
      if (u > u0 + 1e-9) {
        throw EngineError("semiflow: |psi| grew beyond |x0|; the flow left the verified domain");
      }
      ku1 = ku7;
      ki1 = ki7;
      push_sample(cols, p, f, t, u, integral);
      if (hit) ++next;
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h = std::min(h * fac, h_max);
    } else {
      ++tr.rejected_steps;
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
    }
  }

  tr.t = to_vector(ct);
  tr.psi = to_vector(cpsi);
  tr.phi = to_vector(cphi);
  tr.integral = to_vector(ci);
  tr.log_abs_psi = to_vector(cu);
  tr.log_phi = to_vector(clp);
  tr.dlog_abs_psi = to_vector(cdu);
  tr.dlog_phi = to_vector(cdlp);
  tr.dintegral = to_vector(cdi);
  return tr;
}

namespace {

double hermite(double y0, double y1, double d0, double d1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
         (s3 - s2) * h * d1;
}

}  // namespace

SemiflowPoint sample(const SemiflowTrajectory& tr, double t) {
  const auto n = tr.t.size();
  if (n == 0) throw ValidationError("sample: empty trajectory");
  if (!(t >= 0.0 && t <= tr.t_end() * (1.0 + 1e-14))) {
    throw ValidationError("sample: t = " + std::to_string(t) + " is outside [0, " +
                          std::to_string(tr.t_end()) + "]");
  }
  const double sign = tr.x0 > 0.0 ? 1.0 : -1.0;
  auto it = std::upper_bound(tr.t.data(), tr.t.data() + n, t);
  Eigen::Index k = std::max<Eigen::Index>(0, (it - tr.t.data()) - 1);
  if (k >= n - 1) {
    const auto last = n - 1;
    return {t, tr.psi[last], tr.phi[last], tr.integral[last]};
  }
  if (t == tr.t[k]) return {t, tr.psi[k], tr.phi[k], tr.integral[k]};

  const double h = tr.t[k + 1] - tr.t[k];
  const double s = (t - tr.t[k]) / h;
  SemiflowPoint out;
  out.t = t;
  out.psi = sign * std::exp(hermite(tr.log_abs_psi[k], tr.log_abs_psi[k + 1], tr.dlog_abs_psi[k],
                                    tr.dlog_abs_psi[k + 1], h, s));
  out.phi = std::exp(
      hermite(tr.log_phi[k], tr.log_phi[k + 1], tr.dlog_phi[k], tr.dlog_phi[k + 1], h, s));
  if (tr.integral[k] > 0.0) {
    const double i0 = tr.integral[k];
    const double i1 = tr.integral[k + 1];
    out.integral = std::exp(hermite(std::log(i0), std::log(i1), tr.dintegral[k] / i0,
                                    tr.dintegral[k + 1] / i1, h, s));
  } else {
    out.integral = hermite(tr.integral[k], tr.integral[k + 1], tr.dintegral[k],
                           tr.dintegral[k + 1], h, s);
  }
  return out;
}

double limit_integrand(const Potential& p, double z) {
  const double a = p.d2(0.0);
  if (z == 0.0) return -p.d3(0.0) / (2.0 * a);
  if (std::abs(z) < 0.1) {
    // a z - V'(z) cancels badly near 0, and everywhere for shifted potentials;
    // N(z) = V'(z) - a z = int_0^z (z - r) V'''(r) dr does not.
    const double n = boost::math::quadrature::gauss<double, 15>::integrate(
        [&](double r) { return (z - r) * p.d3(r); }, 0.0, z);
    return -n / (z * (a * z + n));
  }
  return a / p.d1(z) - 1.0 / z;
}

double richardson_limit(const Eigen::Vector3d& t, const Eigen::Vector3d& f, double rate) {
  Eigen::Matrix3d m;
  const double ref = t[2];
  for (int i = 0; i < 3; ++i) {
    const double e = std::exp(-rate * (t[i] - ref));
    m(i, 0) = 1.0;
    m(i, 1) = e;
    m(i, 2) = e * e;
  }
  return m.colPivHouseholderQr().solve(f)[0];
}

ConstantsReport limit_constants(const Potential& p, double x0, double tol) {
  if (x0 == 0.0 || !std::isfinite(x0)) {
    throw ValidationError("limit_constants: x0 must be finite and nonzero");
  }
  if (!(tol > 0.0) || tol >= 1e-2) {
    throw ValidationError("limit_constants: tol must lie in (0, 1e-2)");
  }
  const double a = p.d2(0.0);
  if (!(a > 0.0)) throw ValidationError("limit_constants: V''(0) must be > 0");

  ConstantsReport r;
  r.curvature = a;
  const double quad_tol = std::min(1e-12, tol * 1e-3);
  const double j = integrate([&p](double z) { return limit_integrand(p, z); }, 0.0, x0, quad_tol)
                       .value;
  r.c_tilde = x0 * std::exp(j);
  r.c = a * r.c_tilde / p.d1(x0);

  // Tails e^{a t} psi_t and e^{a t} Phi_t sampled one relaxation time apart.
  const double tau = 1.0 / a;
  double horizon = (std::log(1e5) + 2.0) * tau;
  SemiflowTrajectory tr;
  for (int attempt = 0;; ++attempt) {
    tr = integrate_semiflow(p, x0, horizon, tol * 1e-2, {horizon - 2 * tau, horizon - tau});
    if (std::abs(tr.psi[tr.psi.size() - 1]) < 1e-5 * std::abs(x0)) break;
    if (attempt == 6) throw EngineError("limit_constants: the flow does not reach the linear regime");
    horizon *= 2.0;
  }
  Eigen::Vector3d ts(horizon - 2 * tau, horizon - tau, horizon);
  Eigen::Vector3d fpsi, fphi, fvar;
  const double sign = x0 > 0.0 ? 1.0 : -1.0;
  for (int i = 0; i < 3; ++i) {
    const auto k = static_cast<Eigen::Index>(
        std::lower_bound(tr.t.data(), tr.t.data() + tr.t.size(), ts[i] - 1e-12) - tr.t.data());
    fpsi[i] = sign * std::exp(a * tr.t[k] + tr.log_abs_psi[k]);
    fphi[i] = std::exp(a * tr.t[k] + tr.log_phi[k]);
    fvar[i] = std::exp(2.0 * tr.log_phi[k]) * tr.integral[k];
    ts[i] = tr.t[k];
  }
  r.c_tilde_extrapolated = richardson_limit(ts, fpsi, a);
  r.c_extrapolated = richardson_limit(ts, fphi, a);
  r.variance_limit = richardson_limit(ts, fvar, a);
  r.disagreement = std::max(std::abs(r.c_tilde - r.c_tilde_extrapolated) / std::abs(r.c_tilde),
                            std::abs(r.c - r.c_extrapolated) / std::abs(r.c));
  if (!(r.disagreement <= 100.0 * tol)) {
    throw EngineError("limit_constants: quadrature and extrapolation disagree by " +
                      std::to_string(r.disagreement) + " (relative)");
  }
  return r;
}

VarianceLimit variance_limit(const SemiflowTrajectory& tr, double curvature) {
  if (tr.t.size() < 2) throw ValidationError("variance_limit: trajectory too short");
  if (!(curvature > 0.0)) throw ValidationError("variance_limit: curvature must be > 0");
  const auto last = tr.t.size() - 1;
  if (!(std::abs(tr.psi[last]) < 1e-4 * std::abs(tr.x0))) {
    throw ValidationError(
        "variance_limit: trajectory too short; |psi_end| must be below 1e-4 |x0|");
  }
  VarianceLimit v;
  v.at_end = std::exp(2.0 * tr.log_phi[last]) * tr.integral[last];
  const double tau = 1.0 / curvature;
  const double T = tr.t_end();
  if (T - 2 * tau <= 0.0) {
    v.extrapolated = v.at_end;
    return v;
  }
  Eigen::Vector3d ts(T - 2 * tau, T - tau, T);
  Eigen::Vector3d fv;
  for (int i = 0; i < 3; ++i) {
    const auto s = sample(tr, ts[i]);
    fv[i] = s.phi * s.phi * s.integral;
  }
  v.extrapolated = richardson_limit(ts, fv, curvature);
  return v;
}

double psi_sup_ratio(const SemiflowTrajectory& tr, double epsilon, double t1, double t2) {
  if (!(epsilon > 0.0)) throw ValidationError("psi_sup_ratio: epsilon must be > 0");
  if (!(t1 <= t2)) throw ValidationError("psi_sup_ratio: need t1 <= t2");
  double m = std::max(std::abs(sample(tr, t1).psi), std::abs(sample(tr, t2).psi));
  for (Eigen::Index k = 0; k < tr.t.size(); ++k) {
    if (tr.t[k] > t1 && tr.t[k] < t2) m = std::max(m, std::abs(tr.psi[k]));
  }
  return m / std::sqrt(epsilon);
}

}  // namespace cutoff

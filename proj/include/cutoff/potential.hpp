#pragma once

#include <array>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace cutoff {

using Evaluator = std::function<double(double)>;

/// Where a classification came from: declared analytic metadata (builtins)
/// or sampling of the evaluators on a finite probe set.
enum class ClassBasis { exact, probe };

/// Position of a potential in the hierarchy
///   regular  >  coercive (V'' >= delta)  >  smooth-coercive (sup|V''|, sup|V'''| finite).
///
/// The class flags follow `basis`; the three extrema are always empirical
/// values over the probe set, so they are only sound on that set.
struct Classification {
  bool regular = false;
  bool coercive = false;
  bool smooth_coercive = false;
  double delta = std::numeric_limits<double>::quiet_NaN();   // min V'' on probes
  double kappa2 = std::numeric_limits<double>::quiet_NaN();  // max |V''| on probes
  double kappa3 = std::numeric_limits<double>::quiet_NaN();  // max |V'''| on probes
  ClassBasis basis = ClassBasis::probe;
  std::string reason;  // first failed check, empty when smooth-coercive
};

/// Analytic metadata a builtin carries about itself. Infinite kappas mean
/// unbounded on the real line.
struct PotentialTraits {
  bool regular = false;
  bool coercive = false;
  double delta = 0.0;
  double kappa2 = std::numeric_limits<double>::infinity();
  double kappa3 = std::numeric_limits<double>::infinity();
};

/// Immutable one-dimensional potential with evaluators for V, V', V'', V'''.
/// Copies share the evaluators; concurrent reads are safe.
class Potential {
 public:
  Potential(std::string id, std::array<Evaluator, 4> derivatives,
            std::map<std::string, double> parameters = {},
            std::optional<PotentialTraits> traits = std::nullopt);

  /// Derivative of the requested order (0..3). Throws ValidationError on a bad
  /// order and NonFiniteError when the evaluator returns inf/nan.
  double eval(double x, int order) const;

  double value(double x) const { return eval(x, 0); }
  double d1(double x) const { return eval(x, 1); }
  double d2(double x) const { return eval(x, 2); }
  double d3(double x) const { return eval(x, 3); }

  const std::string& id() const { return id_; }
  const std::map<std::string, double>& parameters() const { return parameters_; }
  const std::optional<PotentialTraits>& traits() const { return traits_; }

 private:
  std::string id_;
  std::shared_ptr<const std::array<Evaluator, 4>> derivatives_;
  std::map<std::string, double> parameters_;
  std::optional<PotentialTraits> traits_;
};

// Builtin catalog.
Potential quadratic(double alpha);
Potential quartic();                                 // x^2/2 + x^4/4
Potential double_well(double a, double tilt = 0.0);  // (x^2 - a^2)^2/4 + tilt*x
Potential user_defined(std::string id, Evaluator v, Evaluator dv, Evaluator d2v, Evaluator d3v);

/// u -> V(center + u) - V(center); moves a local minimum to the origin.
Potential shifted(const Potential& p, double center);

/// Strongest class consistent with the probes on [a, b] and the checks at 0.
/// Builtins (and truncations) report their declared traits with ClassBasis::exact
/// but still fill the probe-based extrema.
Classification classify(const Potential& p, double a, double b, int n_probes);

/// Smooth-coercive truncation V_M of a coercive potential: V_M = V on
/// |x| <= sqrt(2) M, V_M'' = delta on |x| >= 2M, V_M'' >= delta everywhere.
/// `delta` defaults to the declared coercivity constant of p.
Potential smooth_truncate(const Potential& p, double M,
                          std::optional<double> delta = std::nullopt);

/// C-infinity step used by smooth_truncate: 0 on u <= 1/2, 1 on u >= 1.
double smooth_step(double u);
double smooth_step_derivative(double u);

}  // namespace cutoff

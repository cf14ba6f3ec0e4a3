#pragma once

#include <limits>

namespace cutoff {

enum class WellDepth { single, shallow, deep, equal };

/// Strict local minimum of a potential.
struct WellDescriptor {
  double location = 0.0;
  double curvature = 0.0;  // V''(x*) > 0
  // V(saddle) - V(x*) for the lowest neighbouring maximum; infinite for a lone well
  double barrier = std::numeric_limits<double>::infinity();
  double saddle = std::numeric_limits<double>::quiet_NaN();  // location of that maximum
  double saddle_distance = std::numeric_limits<double>::infinity();
  WellDepth depth = WellDepth::single;
};

}  // namespace cutoff

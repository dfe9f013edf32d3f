#ifndef KSHC_CUTOFF_HPP
#define KSHC_CUTOFF_HPP

#include "kshc/errors.hpp"

namespace kshc {

/**
 * Truncation profile: 1 on [0,R], 0 on [2R,inf), quintic smoothstep in
 * between. The transition derivative peaks at 15/(8R).
 */
struct Cutoff {
  double R = 1.0;

  explicit Cutoff(double radius) : R(radius) {
    if (!(radius > 0.0)) throw InvalidArgument("R", "radius must be positive");
  }

  double eval(double s) const {
    if (s <= R) return 1.0;
    if (s >= 2.0 * R) return 0.0;
    const double u = (s - R) / R;
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  }

  double deriv_sup() const { return 15.0 / (8.0 * R); }
};

}  // namespace kshc

#endif

#include "kshc/rng.hpp"

#include <cmath>

#include "kshc/errors.hpp"

namespace kshc {

BrownianPath BrownianPath::generate(double dt, int n_steps, std::uint64_t seed) {
  if (!(dt > 0.0)) throw InvalidArgument("dt", "must be positive");
  if (n_steps <= 0) throw InvalidArgument("n_steps", "must be positive");
  BrownianPath p;
  p.dt = dt;
  p.seed = seed;
  p.increments.resize(n_steps);
  GaussianRng rng(seed);
  const double s = std::sqrt(dt);
  for (int k = 0; k < n_steps; ++k) p.increments[k] = s * rng.normal();
  return p;
}

BrownianPath BrownianPath::coarsen(int factor) const {
  if (factor < 1 || n_steps() % factor != 0)
    throw InvalidArgument("factor", "must divide n_steps");
  BrownianPath c;
  c.dt = dt * factor;
  c.seed = seed;
  c.increments.resize(n_steps() / factor);
  for (int k = 0; k < static_cast<int>(c.increments.size()); ++k) {
    double acc = 0.0;
    for (int j = 0; j < factor; ++j) acc += increments[k * factor + j];
    c.increments[k] = acc;
  }
  return c;
}

}  // namespace kshc

#include "kshc/weights.hpp"

#include <cmath>
#include <limits>

#include "kshc/errors.hpp"

namespace kshc {

namespace {

// Builds the bump on the left half: critical point c < 1/2 (or == 1/2).
// psi'(x) = A (c - x) ((x - gamma)^2 + delta) with gamma, delta chosen so
// that the integral over [0,1] vanishes (psi(1) = 0) and delta > 0.
PsiBump build_left(double c) {
  double gamma, delta;
  if (std::abs(c - 0.5) < 1e-12) {
    gamma = 0.5;
    delta = 0.25;
  } else {
    // I2(g) = (c/3 - 1/4) + g (2/3 - c) + g^2 (c - 1/2); maximized over g.
    gamma = (2.0 / 3.0 - c) / (1.0 - 2.0 * c);
    const double i2 = (c / 3.0 - 0.25) + gamma * (2.0 / 3.0 - c) +
                      gamma * gamma * (c - 0.5);
    delta = i2 / (0.5 - c);
    if (!(delta > 1e-9))
      throw InvalidArgument("d1_interval",
                            "quartic bump cannot place its critical point here");
  }
  PsiBump b;
  b.x_crit = c;
  b.c4 = -0.25;
  b.c3 = (c + 2.0 * gamma) / 3.0;
  b.c2 = -(2.0 * gamma * c + gamma * gamma + delta) / 2.0;
  // psi(1) = 0 enforced exactly; differs from c(gamma^2+delta) by roundoff only
  b.c1 = -(b.c4 + b.c3 + b.c2);
  const double peak = b.eval(c);
  b.c4 /= peak;
  b.c3 /= peak;
  b.c2 /= peak;
  // re-enforce psi(1) = 0 exactly in floating point (matches eval order)
  b.c1 = -((b.c4 + b.c3) + b.c2);
  return b;
}

PsiBump mirror(const PsiBump& m) {
  PsiBump b;
  b.c4 = m.c4;
  b.c3 = -4.0 * m.c4 - m.c3;
  b.c2 = 6.0 * m.c4 + 3.0 * m.c3 + m.c2;
  b.c1 = -((b.c4 + b.c3) + b.c2);  // psi(1) = 0 exactly
  b.x_crit = 1.0 - m.x_crit;
  return b;
}

}  // namespace

PsiBump psi_build(double d1_lo, double d1_hi) {
  if (!(0.0 < d1_lo && d1_lo < d1_hi && d1_hi < 1.0))
    throw InvalidArgument("d1_interval", "must be strictly inside (0,1)");
  const double c = 0.5 * (d1_lo + d1_hi);
  PsiBump b = (c <= 0.5) ? build_left(c) : mirror(build_left(1.0 - c));
  if (!(b.x_crit > d1_lo && b.x_crit < d1_hi))
    throw InvalidArgument("d1_interval", "critical point escaped the interval");
  return b;
}

CarlemanParams CarlemanParams::make(double mu, double lambda, int m,
                                    double k_const, PsiBump psi, double T) {
  if (!(mu > 0.0)) throw InvalidArgument("mu", "must be positive");
  if (!(lambda > 0.0)) throw InvalidArgument("lambda", "must be positive");
  if (m <= 3) throw InvalidArgument("m", "requires m > 3");
  if (!(k_const > m)) throw InvalidArgument("k_const", "requires k > m");
  if (!(T > 0.0)) throw InvalidArgument("T", "must be positive");
  CarlemanParams p;
  p.mu = mu;
  p.lambda = lambda;
  p.m = m;
  p.k_const = k_const;
  p.psi = psi;
  p.T = T;
  const double psi_max = psi.max_value();
  p.c2 = k_const * psi_max;
  p.c1 = k_const * ((m + 1.0) / m) * psi_max;
  return p;
}

CarlemanPoint carleman_eval(const CarlemanParams& p, double x, double t) {
  if (t < 0.0 || t > p.T) throw InvalidArgument("t", "outside [0,T]");
  CarlemanPoint out;
  if (t == 0.0 || t == p.T) {
    out.alpha_m = -std::numeric_limits<double>::infinity();
    out.phi_m = std::numeric_limits<double>::infinity();
    out.theta = 0.0;
    out.singular = true;
    return out;
  }
  const double log_den = p.m * (std::log(t) + std::log(p.T - t));
  const double e_psi = std::exp(p.mu * (p.psi.eval(x) + p.c2));
  const double e_c1 = std::exp(p.mu * p.c1);
  out.alpha_m = (e_psi - e_c1) * std::exp(-log_den);
  out.phi_m = e_psi * std::exp(-log_den);
  out.theta = std::exp(p.lambda * out.alpha_m);
  return out;
}

double carleman_log_phi(const CarlemanParams& p, double x, double t) {
  return p.mu * (p.c2 + p.psi.eval(x)) - p.m * (std::log(t) + std::log(p.T - t));
}

double carleman_log_theta(const CarlemanParams& p, double x, double t) {
  const double log_den = p.m * (std::log(t) + std::log(p.T - t));
  const double e_psi = std::exp(p.mu * (p.psi.eval(x) + p.c2));
  const double e_c1 = std::exp(p.mu * p.c1);
  return p.lambda * (e_psi - e_c1) * std::exp(-log_den);
}

CarlemanBoundReport carleman_bounds_check(const CarlemanParams& p, int q,
                                          int nx, int nt) {
  if (q < 1) throw InvalidArgument("q", "must be >= 1");
  CarlemanBoundReport rep;
  rep.q = q;
  rep.t_margin = 0.02 * p.T;

  const double t_lo = rep.t_margin, t_hi = p.T - rep.t_margin;
  const double ht = (t_hi - t_lo) / (nt - 1);
  const double inv_m = 1.0 / p.m;

  // boundary traces: psi(0) = 0
  auto log_theta_star = [&](double t) { return carleman_log_theta(p, 0.0, t); };
  auto log_phi_star = [&](double t) { return carleman_log_phi(p, 0.0, t); };

  double c_time = 0.0;
  for (int k = 1; k + 1 < nt; ++k) {
    const double t = t_lo + k * ht;
    const double fp = log_theta_star(t + ht) + q * log_phi_star(t + ht);
    const double fm = log_theta_star(t - ht) + q * log_phi_star(t - ht);
    const double dlog = (fp - fm) / (2.0 * ht);
    const double denom_log = std::log(p.lambda) + (1.0 + inv_m) * log_phi_star(t);
    const double ratio = std::abs(dlog) * std::exp(-denom_log);
    if (ratio > c_time) c_time = ratio;
  }
  rep.c_time = c_time;

  const double hx = 1.0 / (nx - 1);
  double c_space = 0.0;
  for (int k = 0; k < nt; ++k) {
    const double t = t_lo + k * ht;
    for (int j = 1; j + 1 < nx; ++j) {
      const double x = j * hx;
      auto g = [&](double xx) {
        return 2.0 * carleman_log_theta(p, xx, t) + q * carleman_log_phi(p, xx, t);
      };
      const double dlog = (g(x + hx) - g(x - hx)) / (2.0 * hx);
      const double denom_log = std::log(p.lambda) + carleman_log_phi(p, x, t);
      const double ratio = std::abs(dlog) * std::exp(-denom_log);
      if (ratio > c_space) c_space = ratio;
    }
  }
  rep.c_space = c_space;
  return rep;
}

void SourceWeightParams::validate() const {
  if (!(M > 0.0)) throw InvalidArgument("M", "must be positive");
  if (!(T > 0.0 && T < 1.0)) throw InvalidArgument("T", "must lie in (0,1)");
  if (!(Q > 1.0 && Q < std::sqrt(2.0)))
    throw InvalidArgument("Q", "must lie in (1, sqrt(2))");
  if (!(P > Q * Q / (2.0 - Q * Q)))
    throw InvalidArgument("P", "requires P > Q^2/(2-Q^2)");
  if (!((1.0 + P) * Q * Q / 2.0 < zeta && zeta < P))
    throw InvalidArgument("zeta", "requires (1+P)Q^2/2 < zeta < P");
}

double SourceWeightParams::log_gamma(double t) const {
  if (!(t > 0.0)) throw InvalidArgument("t", "gamma is undefined at t <= 0");
  return M / t;
}

double SourceWeightParams::log_rho0_gap(double gap) const {
  if (gap < 0.0) throw InvalidArgument("t", "rho-family defined on [0,T]");
  if (gap == 0.0) return -std::numeric_limits<double>::infinity();
  return -M * P / ((Q - 1.0) * gap);
}

double SourceWeightParams::log_rho_gap(double gap) const {
  if (gap < 0.0) throw InvalidArgument("t", "rho-family defined on [0,T]");
  if (gap == 0.0) return -std::numeric_limits<double>::infinity();
  return -(1.0 + P) * Q * Q * M / ((Q - 1.0) * gap);
}

double SourceWeightParams::log_rho_hat_gap(double gap) const {
  if (gap < 0.0) throw InvalidArgument("t", "rho-family defined on [0,T]");
  if (gap == 0.0) return -std::numeric_limits<double>::infinity();
  return -M * zeta / ((Q - 1.0) * gap);
}

double SourceWeightParams::grid_gap(int k) const {
  if (k < 0) throw InvalidArgument("k", "grid index must be >= 0");
  return T / std::pow(Q, k);
}

double SourceWeightParams::log_rho0(double t) const { return log_rho0_gap(T - t); }

double SourceWeightParams::log_rho(double t) const { return log_rho_gap(T - t); }

double SourceWeightParams::log_rho_hat(double t) const {
  return log_rho_hat_gap(T - t);
}

double SourceWeightParams::gamma(double t) const { return std::exp(log_gamma(t)); }
double SourceWeightParams::rho0(double t) const { return std::exp(log_rho0(t)); }
double SourceWeightParams::rho(double t) const { return std::exp(log_rho(t)); }
double SourceWeightParams::rho_hat(double t) const { return std::exp(log_rho_hat(t)); }

double SourceWeightParams::grid_time(int k) const {
  if (k < 0) throw InvalidArgument("k", "grid index must be >= 0");
  return T - T / std::pow(Q, k);
}

std::vector<double> SourceWeightParams::source_grid(int k_max) const {
  std::vector<double> g(k_max + 1);
  for (int k = 0; k <= k_max; ++k) g[k] = grid_time(k);
  return g;
}

SourceWeightPoint source_weights_eval(const SourceWeightParams& p, double t) {
  return SourceWeightPoint{p.gamma(t), p.rho0(t), p.rho(t), p.rho_hat(t)};
}

}  // namespace kshc

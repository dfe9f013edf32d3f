#ifndef KSHC_WEIGHTS_HPP
#define KSHC_WEIGHTS_HPP

#include <vector>

namespace kshc {

/**
 * Quartic auxiliary function on [0,1]: psi(0)=psi(1)=0, psi>0 inside, and a
 * single interior critical point x_crit, so |psi'|>0 away from it. Stored as
 * the exact polynomial; normalized so max psi = 1.
 */
struct PsiBump {
  // psi(x) = c4 x^4 + c3 x^3 + c2 x^2 + c1 x
  double c4 = 0, c3 = 0, c2 = 0, c1 = 0;
  double x_crit = 0.5;

  double eval(double x) const { return ((c4 * x + c3) * x + c2) * x * x + c1 * x; }
  double deriv(double x) const { return ((4 * c4 * x + 3 * c3) * x + 2 * c2) * x + c1; }
  double max_value() const { return eval(x_crit); }  // == 1 after normalization
};

/// Build the bump with its critical point at the midpoint of d1 = (lo, hi).
/// The quartic family can place the critical point only moderately off-center;
/// infeasible intervals are rejected.
PsiBump psi_build(double d1_lo, double d1_hi);

/**
 * Parameters of the Carleman weights
 *   alpha_m = (e^{mu(psi+c2)} - e^{mu c1}) / (t^m (T-t)^m),
 *   phi_m   = e^{mu(c2+psi)} / (t^m (T-t)^m),   theta = e^{lambda alpha_m},
 * with c2 = k |psi|_inf and c1 = k (m+1)/m |psi|_inf, k > m > 3.
 */
struct CarlemanParams {
  double mu = 0;
  double lambda = 0;
  int m = 0;
  double k_const = 0;
  PsiBump psi;
  double c1 = 0, c2 = 0;
  double T = 0;

  static CarlemanParams make(double mu, double lambda, int m, double k_const,
                             PsiBump psi, double T);
};

struct CarlemanPoint {
  double alpha_m = 0;
  double phi_m = 0;
  double theta = 0;
  bool singular = false;  // t at an endpoint: theta -> 0, phi_m -> +inf
};

CarlemanPoint carleman_eval(const CarlemanParams& p, double x, double t);

/// log phi_m(x,t); usable where phi_m itself would overflow.
double carleman_log_phi(const CarlemanParams& p, double x, double t);
/// lambda * alpha_m(x,t) = log theta.
double carleman_log_theta(const CarlemanParams& p, double x, double t);

/**
 * Smallest constants C such that, on an interior grid,
 *   |d_t (theta* phi*^q)| <= C lambda (phi*)^{1+1/m} (theta* phi*^q)
 *   |d_x (theta^2 phi^q)| <= C lambda phi (theta^2 phi^q)
 * where starred quantities are the boundary (minimum-in-x) traces. Ratios are
 * formed from finite differences of the logarithms, so no overflow occurs.
 */
struct CarlemanBoundReport {
  double c_time = 0;
  double c_space = 0;
  double t_margin = 0;  // excluded band near t=0 and t=T
  int q = 0;
};

CarlemanBoundReport carleman_bounds_check(const CarlemanParams& p, int q,
                                          int nx = 200, int nt = 1000);

/**
 * Source-term-method weight family on a horizon T in (0,1):
 *   gamma(t)  = e^{M/t}
 *   rho0(t)   = exp(-MP / ((Q-1)(T-t)))
 *   rho(t)    = exp(-(1+P)Q^2 M / ((Q-1)(T-t)))
 *   rho_hat(t)= exp(-M zeta / ((Q-1)(T-t)))
 * with Q in (1, sqrt(2)), P > Q^2/(2-Q^2), (1+P)Q^2/2 < zeta < P.
 */
struct SourceWeightParams {
  double M = 1.0;
  double P = 4.0;
  double Q = 1.2;
  double zeta = 3.8;
  double T = 0.5;

  void validate() const;

  double log_gamma(double t) const;
  double log_rho0(double t) const;   // -inf at t == T
  double log_rho(double t) const;
  double log_rho_hat(double t) const;

  /// Gap-based forms, parameterized by the distance to the horizon
  /// gap = T - t. Near the grid-time accumulation t -> T the gap is the
  /// well-conditioned representation: forming T - t_k loses Q^k digits.
  double log_rho0_gap(double gap) const;
  double log_rho_gap(double gap) const;
  double log_rho_hat_gap(double gap) const;
  /// T - T_k = T / Q^k, exactly as a formula.
  double grid_gap(int k) const;

  double gamma(double t) const;
  double rho0(double t) const;       // continuous extension: 0 at t == T
  double rho(double t) const;
  double rho_hat(double t) const;

  /// T_k = T - T/Q^k.
  double grid_time(int k) const;
  std::vector<double> source_grid(int k_max) const;
};

struct SourceWeightPoint {
  double gamma, rho0, rho, rho_hat;
};

SourceWeightPoint source_weights_eval(const SourceWeightParams& p, double t);

}  // namespace kshc

#endif

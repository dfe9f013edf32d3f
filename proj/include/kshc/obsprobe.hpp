#ifndef KSHC_OBSPROBE_HPP
#define KSHC_OBSPROBE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "kshc/sde.hpp"
#include "kshc/weights.hpp"

namespace kshc {

/**
 * Second-order finite differences on the interior grid x_i = i h, h=1/(n+1),
 * for the clamped fourth-order operator (u = u_x = 0, ghost-point
 * elimination) and the Dirichlet second-order one. D4 is the fourth
 * derivative and D2 the negative second derivative, both symmetric positive
 * definite; D1 and D3 are plain first and third derivative stencils.
 */
struct ClampedDiscretization {
  int n = 0;
  double h = 0;
  Eigen::MatrixXd D1, D2, D3, D4;

  explicit ClampedDiscretization(int n_points);
};

/// Smallest clamped-beam eigenvalue k1^4, from the root of cosh(k)cos(k)=1.
double clamped_beam_ground_eigenvalue();

struct SpectralInequalityPoint {
  double r = 0;
  int band = 0;
  double max_ratio = 0;  // max |z|^2 / |z|^2_{L2(D0)} over the band
};

struct SpectralInequalityReport {
  std::vector<SpectralInequalityPoint> sweep;
  double slope = 0;      // fit of log(max_ratio) against r^{1/4}
  double intercept = 0;
};

/// Exact band maximum: 1/lambda_min of the D0 mass matrix on the band.
double spectral_band_ratio(double r, double d0_lo, double d0_hi);

SpectralInequalityReport spectral_inequality_probe(double r_max, double d0_lo,
                                                   double d0_hi);

struct GramianPair {
  Eigen::MatrixXd energy_form;       // initial energy over terminal data
  Eigen::MatrixXd observation_form;  // observed energy over terminal data
};

struct BandObservabilityReport {
  double r = 0, tau = 0;
  int band = 0;
  double constant = 0;  // largest generalized eigenvalue of the pair
  GramianPair gramians;
};

/**
 * Observability constant of the backward band system under the
 * deterministic-data reduction (the martingale integrands vanish, so the
 * coefficients b_i drop out and the mode pairs evolve in closed form; all
 * time integrals are exact).
 */
BandObservabilityReport band_observability_constant(double r, double tau,
                                                    double d0_lo, double d0_hi);

struct ClampedObsReport {
  int n_points = 0;
  int ensemble = 0;
  int data_draws = 0;
  double constant = 0;  // max over the data family of terminal/observed energy
  double ci_rel = 0;    // Monte Carlo relative half-width at the max
};

/// Forward adjoint SDE on the clamped discretization, Euler-Maruyama with
/// implicit stiff part; estimates the terminal-vs-observed energy constant.
ClampedObsReport clamped_observability_probe(int n_points, double d1c,
                                             double d2c, double d3c, double T,
                                             int ensemble, int data_draws,
                                             std::uint64_t seed, double d0_lo,
                                             double d0_hi, double dt,
                                             int workers, double gamma4 = 1.0,
                                             double gamma2 = 1.0);

struct DualityReport {
  int n_points = 0;
  double duality_residual_rel = 0;  // both sides of the pairing identity
  double initial_residual_rel = 0;  // |(y(0),z(0))| relative to the data
  double control_norm2 = 0;         // int int_{D0} |h|^2
  double tikhonov_mu = 0;
  bool regularized = false;
};

/**
 * Riesz-representation control for the deterministic backward pair on the
 * clamped discretization. The discrete primal propagator is the exact
 * transpose of the adjoint one-step map, so the duality identity telescopes
 * to machine precision; the Gramian solve determines the least-norm control
 * and the remaining initial residual tracks the regularization.
 */
DualityReport duality_control_backward(const Eigen::VectorXd& yT,
                                       const Eigen::VectorXd& zT,
                                       double probe_constant, int n_points,
                                       double T, double dt, double d0_lo,
                                       double d0_hi, double tikhonov = 0.0);

struct CarlemanFunctionals {
  double i_ks = 0;
  double i_h = 0;
};

struct CarlemanFunctionalTerms {
  double ks[4] = {0, 0, 0, 0};  // lambda^{1,3,5,7} addends of I_KS
  double h[2] = {0, 0};         // lambda^{1,3} addends of I_H
};

/**
 * Weighted space-time functionals of a modal trajectory: I_KS applied to the
 * fourth-order component, I_H applied to the x-derivative of the heat
 * component. Spatial derivatives are spectral; the singular time endpoints
 * contribute zero. lambda_poly scales only the polynomial weight powers, so
 * the theta-frozen homogeneity of each addend is testable.
 */
CarlemanFunctionalTerms carleman_functional_terms(const TrajectoryRecord& traj,
                                                  const CarlemanParams& p,
                                                  const SpectralBasis& basis,
                                                  int nx, double lambda_poly);

CarlemanFunctionals carleman_functionals(const TrajectoryRecord& traj,
                                         const CarlemanParams& p,
                                         const SpectralBasis& basis,
                                         int nx = 200);

}  // namespace kshc

#endif

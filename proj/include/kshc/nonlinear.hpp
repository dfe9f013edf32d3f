#ifndef KSHC_NONLINEAR_HPP
#define KSHC_NONLINEAR_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "kshc/cutoff.hpp"
#include "kshc/sourceterm.hpp"

namespace kshc {

/// Truncated transport drift f_R = phi_R(xt_value) * (y y_x).
Eigen::VectorXd f_R_eval(const Eigen::VectorXd& y_modes, double xt_value,
                         const Cutoff& cutoff, const ConvectionOp& conv);

struct LipschitzReport {
  double c_fitted = 0;  // smallest C making the truncation estimate hold
  int grid_points = 0;
};

/**
 * Smallest constant C such that along the common grid of two recorded
 * trajectories (with tracked running X_t values)
 *   |(f_R(y1) - f_R(y2)) / rho| <= C R (|(y1,z1)-(y2,z2)|_{X_t} + |(y1-y2)/rho_hat|_{H1}).
 */
LipschitzReport lipschitz_probe(const TrajectoryRecord& a,
                                const TrajectoryRecord& b, double R,
                                const SourceWeightParams& wp,
                                const SpectralBasis& basis);

struct FixedPointOptions {
  int n_paths = 50;
  int workers = 1;
  std::uint64_t seed = 1;
  int max_iters = 12;
  int min_iters = 3;
  double s_tol_rel = 1e-8;  // stop when d_n <= s_tol_rel * d_1
  SourceTermOptions st;
};

struct FixedPointPathSummary {
  bool converged = false;
  int iters = 0;
  std::vector<double> s_dist;  // iterate distances in the S norm
  double max_ratio = 0;        // max d_n/d_{n-1} over n >= 2
  double data_norm2 = 0;       // |y0|_{H2}^2 + |z0|_{H1}^2
  double yT_norm2 = 0;
  double xT_norm2 = 0;         // squared X_T value over the controlled range
  double final_norm2 = 0;
};

/// Full per-path artifacts of one fixed-point run (single-path analysis).
struct FixedPointPathRun {
  FixedPointPathSummary summary;
  std::vector<ModalState> states;
  std::vector<double> xt_running;
  std::vector<Eigen::VectorXd> controls;
  std::vector<Eigen::VectorXd> source;  // converged iterate F
};

FixedPointPathRun fixed_point_solve_path(const ModalState& x0, double R,
                                         const SourceTermPlan& plan,
                                         const BrownianPath& path,
                                         const SpectralBasis& basis,
                                         const SystemCoefficients& coeffs,
                                         const ControlOperator& ctrl_op,
                                         const ConvectionOp& conv,
                                         const FixedPointOptions& opts);

using DataGenerator = std::function<ModalState(int path)>;

struct FixedPointReport {
  double T = 0, R = 0;
  int K = 0;
  double dt = 0;
  int paths = 0;
  bool all_converged = false;
  double max_contraction_ratio = 0;
  double e_data_norm2 = 0;
  double e_yT_norm2 = 0;
  double e_xT_norm2 = 0;
  double e_final_norm2 = 0;
  std::vector<FixedPointPathSummary> per_path;
};

/**
 * Iterates the source map F -> f_R(y_F) per path with common randomness:
 * every iteration re-solves the source-term control problem with the current
 * iterate as source, against the same Brownian increments.
 */
FixedPointReport fixed_point_solve(const DataGenerator& data, double R,
                                   const SourceWeightParams& wp,
                                   const SpectralBasis& basis,
                                   const SystemCoefficients& coeffs,
                                   const ControlOperator& ctrl_op,
                                   const FixedPointOptions& opts);

/**
 * Measured theorem constant: smallest C with E(|.|_{X_T}^2) <= e^{2C/T}
 * E(data norms) on a pilot ensemble of controlled linear-regime runs (tiny
 * data, cutoff inactive), inflated by `margin`. The paper leaves this
 * constant existential; the certificate radius R = e^{-C/T} and data size
 * delta = e^{-2C/T} sqrt(epsilon) use the calibrated value.
 */
double calibrate_certificate_constant(const SourceWeightParams& wp,
                                      const SpectralBasis& basis,
                                      const SystemCoefficients& coeffs,
                                      const ControlOperator& ctrl_op,
                                      int paths, std::uint64_t seed,
                                      const FixedPointOptions& fp_opts,
                                      double margin = 1.1);

struct CertificateReport {
  double epsilon = 0;
  double T = 0;
  double c_hat = 0;
  double R = 0;
  double log_R = 0;
  double delta = 0;
  double log_delta = 0;
  int paths = 0;
  int exceedance_count = 0;
  double exceedance_fraction = 0;
  double empirical_mean_XT2 = 0;
  double markov_bound = 0;  // empirical mean / R^2
  double binomial_ci = 0;
  bool markov_ok = false;
  bool epsilon_ok = false;
  bool all_converged = false;
  bool ci_warning = false;  // fewer than 100 paths
};

/**
 * Monte Carlo certificate: data drawn with H2 x H1 norm exactly delta =
 * e^{-2C/T} sqrt(epsilon), trajectories from the fixed point with R =
 * e^{-C/T}; counts paths whose X_T value exceeds R and checks the Markov
 * bound and the epsilon level against the binomial confidence width.
 */
CertificateReport statistical_certificate(double epsilon, double c_hat,
                                          const SourceWeightParams& wp,
                                          const SpectralBasis& basis,
                                          const SystemCoefficients& coeffs,
                                          const ControlOperator& ctrl_op,
                                          int paths, std::uint64_t seed,
                                          const FixedPointOptions& fp_opts);

}  // namespace kshc

#endif
